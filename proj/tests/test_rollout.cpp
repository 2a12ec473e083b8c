#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "mbdp/envs/discrete_mdp.hpp"
#include "mbdp/risk/risk.hpp"
#include "mbdp/rollout.hpp"
#include "test_util.hpp"

using namespace mbdp;

namespace {

/// Hand-built batch: one sample per (group, rollout, timestep, reward) tuple.
RolloutBatch make_batch(const std::vector<std::tuple<int, int, int, double>>& rows, int n_groups) {
  RolloutBatch batch;
  batch.n_groups = n_groups;
  for (const auto& [g, k, t, r] : rows) {
    RolloutSample s;
    s.transition = testutil::make_transition({0.0}, {0.0}, r, {0.0});
    s.group = g;
    s.rollout = k;
    s.timestep = t;
    batch.samples.push_back(s);
  }
  return batch;
}

std::vector<double> rewards_of(const RolloutBatch& batch) {
  std::vector<double> out;
  for (const auto& s : batch.samples) out.push_back(s.transition.reward);
  return out;
}

EnsembleState trained_tiny_ensemble(ReplayBuffer& buf, int members = 2) {
  RngStream rng(50);
  const testutil::LinearSystem sys = testutil::LinearSystem::random(2, 1, rng);
  sys.fill(buf, 300, 51);
  EnsembleState ens = make_ensemble(members, 2, 1, {16}, 1e-3, 52);
  const DataSplit split = DataSplit::make(buf.size(), 0.2, 53);
  train_ensemble(ens, buf, split, 50, 64, 54);
  std::vector<Transition> validation;
  for (std::size_t i : split.validation) validation.push_back(buf.at(i));
  for (auto& m : ens.members) compute_bias(m, validation);
  model_dropout(ens, 0.0);
  return ens;
}

}  // namespace

TEST_CASE("percentile threshold: nearest rank on 1..10") {
  CHECK(percentile_threshold({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.2) == doctest::Approx(8.0));
  CHECK(percentile_threshold({5, 1, 3, 2, 4}, 0.0) == doctest::Approx(5.0));  // max
  CHECK(percentile_threshold({2.5, 2.5, 2.5}, 0.7) == doctest::Approx(2.5));
  CHECK_THROWS_AS(percentile_threshold({}, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(percentile_threshold({1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(percentile_threshold({std::nan("")}, 0.2), std::invalid_argument);
}

TEST_CASE("dropout on one group of 1..10 at alpha 0.2 keeps 1..8") {
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int i = 1; i <= 10; ++i) rows.push_back({0, i, 0, static_cast<double>(i)});
  const RolloutBatch out = rollout_dropout(make_batch(rows, 1), 0.2);
  const auto kept = rewards_of(out);
  CHECK(kept.size() == 8);
  for (double r : kept) CHECK(r <= 8.0);
  CHECK(out.thresholds[0] == doctest::Approx(8.0));
}

TEST_CASE("alpha 0 is the identity") {
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int i = 1; i <= 10; ++i) rows.push_back({0, i, 0, static_cast<double>(i)});
  const RolloutBatch batch = make_batch(rows, 1);
  const RolloutBatch out = rollout_dropout(batch, 0.0);
  CHECK(out.size() == batch.size());
}

TEST_CASE("thresholds are per group, not global") {
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int i = 1; i <= 10; ++i) rows.push_back({0, i, 0, static_cast<double>(i)});
  for (int i = 11; i <= 20; ++i) rows.push_back({1, i, 0, static_cast<double>(i)});
  const RolloutBatch out = rollout_dropout(make_batch(rows, 2), 0.5);
  std::map<int, std::set<double>> kept;
  for (const auto& s : out.samples) kept[s.group].insert(s.transition.reward);
  CHECK(kept[0] == std::set<double>{1, 2, 3, 4, 5});
  CHECK(kept[1] == std::set<double>{11, 12, 13, 14, 15});
}

TEST_CASE("groups below the minimum size are kept whole") {
  std::vector<std::tuple<int, int, int, double>> rows = {
      {0, 0, 0, 5.0}, {0, 1, 0, 9.0}, {0, 2, 0, 1.0}};
  const RolloutBatch out = rollout_dropout(make_batch(rows, 1), 0.5, /*min_group_size=*/5);
  CHECK(out.size() == 3);
}

TEST_CASE("retention count, pessimism and alpha nesting over random batches") {
  RngStream rng(60);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::tuple<int, int, int, double>> rows;
    const int n_groups = 1 + static_cast<int>(rng.integer(4));
    std::map<int, int> group_sizes;
    for (int g = 0; g < n_groups; ++g) {
      const int size = 5 + static_cast<int>(rng.integer(30));
      group_sizes[g] = size;
      for (int i = 0; i < size; ++i) rows.push_back({g, i, 0, rng.uniform(-1, 1)});
    }
    const RolloutBatch batch = make_batch(rows, n_groups);
    const double a1 = rng.uniform(0.0, 0.5);
    const double a2 = rng.uniform(a1, 0.99);

    const RolloutBatch out1 = rollout_dropout(batch, a1, 5);
    const RolloutBatch out2 = rollout_dropout(batch, a2, 5);

    std::map<int, std::vector<double>> kept1;
    std::map<int, std::multiset<double>> dropped;
    std::map<int, int> counts;
    for (const auto& s : out1.samples) {
      kept1[s.group].push_back(s.transition.reward);
      ++counts[s.group];
    }
    // per-group: count exact, pessimism (max kept <= min dropped)
    for (int g = 0; g < n_groups; ++g) {
      const long expected = ceil_count((1.0 - a1) * group_sizes[g]);
      CHECK(counts[g] == expected);
      std::multiset<double> group_all;
      for (const auto& s : batch.samples)
        if (s.group == g) group_all.insert(s.transition.reward);
      std::multiset<double> kept_set(kept1[g].begin(), kept1[g].end());
      for (double r : kept_set) group_all.erase(group_all.find(r));
      if (!group_all.empty() && !kept_set.empty())
        CHECK(*kept_set.rbegin() <= *group_all.begin());
    }
    // nesting: the larger-alpha retained multiset is contained in the smaller's
    std::map<int, std::multiset<double>> kept2;
    for (const auto& s : out2.samples) kept2[s.group].insert(s.transition.reward);
    for (auto& [g, set2] : kept2) {
      std::multiset<double> set1(kept1[g].begin(), kept1[g].end());
      for (double r : set2) {
        auto it = set1.find(r);
        REQUIRE(it != set1.end());
        set1.erase(it);
      }
    }
  }
}

TEST_CASE("return estimate: single sample, geometric sum, dual recomputation") {
  CHECK(dropout_return_estimate(make_batch({{0, 0, 0, 2.0}}, 1), 0.5) == doctest::Approx(2.0));

  const RolloutBatch one_rollout =
      make_batch({{0, 0, 0, 1.0}, {0, 0, 1, 1.0}, {0, 0, 2, 1.0}}, 1);
  CHECK(dropout_return_estimate(one_rollout, 0.5) == doctest::Approx(1.75).epsilon(1e-12));

  RngStream rng(61);
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int g = 0; g < 3; ++g)
    for (int k = 0; k < 4; ++k)
      for (int t = 0; t < 3; ++t) rows.push_back({g, k, t, rng.uniform(-1, 1)});
  const RolloutBatch batch = make_batch(rows, 3);
  const double gamma = 0.9;
  // straight-line recomputation
  std::map<std::pair<int, int>, double> frag;
  for (const auto& [g, k, t, r] : rows) frag[{g, k}] += std::pow(gamma, t) * r;
  double expected = 0.0;
  for (const auto& [key, v] : frag) expected += v;
  expected /= static_cast<double>(frag.size());
  CHECK(dropout_return_estimate(batch, gamma) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(dropout_return_estimate(RolloutBatch{}, 0.9), std::invalid_argument);
}

namespace {

/// Minimal deterministic env over 2-dim states used as a reward oracle for
/// rollout generation tests.
class FlatEnv final : public envs::ContinuousEnv {
 public:
  FlatEnv() {
    box_.low = Vector::Constant(1, -1.0);
    box_.high = Vector::Constant(1, 1.0);
  }
  std::string name() const override { return "flat"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  const envs::ActionBox& action_box() const override { return box_; }
  double reward_sup() const override { return 1.0; }
  int horizon() const override { return 100; }
  Vector initial_state(RngStream& rng) const override { return rng.uniform_vector(2, -1, 1); }
  double reward(const Vector& s, const Vector& a) const override {
    return std::tanh(s(0) + 0.1 * a(0));
  }
  Vector next_state(const Vector& s, const Vector& a) const override {
    return s + 0.01 * Vector::Constant(2, a(0));
  }
  std::unique_ptr<ContinuousEnv> clone() const override { return std::make_unique<FlatEnv>(*this); }
  std::unique_ptr<ContinuousEnv> perturbed(const envs::PerturbationConfig& p) const override {
    p.validate();
    return clone();
  }

 private:
  envs::ActionBox box_;
};

}  // namespace

TEST_CASE("rollout generation: counting, grouping and determinism collapse") {
  ReplayBuffer buf(400);
  EnsembleState ens = trained_tiny_ensemble(buf);
  FlatEnv env;

  PolicyFn stochastic = [](const Vector&, RngStream& rng) {
    return Vector::Constant(1, rng.uniform(-1, 1));
  };
  const RolloutBatch minimal = generate_rollouts(ens, stochastic, buf, env, 1, 1, 1, 7);
  CHECK(minimal.size() == 1);
  CHECK(minimal.n_groups == 1);

  const RolloutBatch batch = generate_rollouts(ens, stochastic, buf, env, 4, 8, 3, 8);
  CHECK(batch.size() == 96);
  std::map<int, int> per_group;
  for (const auto& s : batch.samples) ++per_group[s.group];
  CHECK(per_group.size() == 4);
  for (const auto& [g, n] : per_group) CHECK(n == 24);
  // timesteps tagged 0..horizon-1
  for (const auto& s : batch.samples) {
    CHECK(s.timestep >= 0);
    CHECK(s.timestep < 3);
  }

  // deterministic policy + mean-only predictions + one retained member:
  // all k rollouts from one start collapse to the same trajectory
  model_dropout(ens, 0.5);  // 2 members -> keep 1
  REQUIRE(ens.retained.size() == 1);
  PolicyFn deterministic = [](const Vector& s, RngStream&) {
    return Vector::Constant(1, std::tanh(s(0)));
  };
  const RolloutBatch collapsed =
      generate_rollouts(ens, deterministic, buf, env, 1, 5, 4, 9, PredictMode::kMeanOnly);
  std::map<int, std::vector<double>> by_rollout;
  for (const auto& s : collapsed.samples)
    by_rollout[s.rollout].push_back(s.transition.next_state(0));
  for (const auto& [k, states] : by_rollout) CHECK(states == by_rollout[0]);
}

TEST_CASE("rollout generation respects worker count") {
  ReplayBuffer buf(400);
  EnsembleState ens = trained_tiny_ensemble(buf);
  FlatEnv env;
  PolicyFn policy = [](const Vector&, RngStream& rng) {
    return Vector::Constant(1, rng.uniform(-1, 1));
  };
  const RolloutBatch serial = generate_rollouts(ens, policy, buf, env, 6, 4, 3, 10, PredictMode::kSample, 1);
  const RolloutBatch parallel = generate_rollouts(ens, policy, buf, env, 6, 4, 3, 10, PredictMode::kSample, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial.samples[i].group == parallel.samples[i].group);
    CHECK((serial.samples[i].transition.next_state - parallel.samples[i].transition.next_state)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("per-trajectory mode keeps whole rollouts") {
  // 2 rollouts of 2 steps each; rollout 1 has the higher return
  const RolloutBatch batch = make_batch(
      {{0, 0, 0, 0.1}, {0, 0, 1, 0.1}, {0, 1, 0, 1.0}, {0, 1, 1, 1.0},
       {0, 2, 0, 0.2}, {0, 2, 1, 0.2}, {0, 3, 0, 0.5}, {0, 3, 1, 0.5}},
      1);
  const RolloutBatch out = rollout_dropout(batch, 0.25, /*min_group_size=*/1,
                                           DropoutGranularity::kPerTrajectory, 1.0);
  // keep ceil(0.75 * 4) = 3 rollouts: 0, 2, 3 (rollout 1 dropped whole)
  std::set<int> kept;
  for (const auto& s : out.samples) kept.insert(s.rollout);
  CHECK(kept == std::set<int>{0, 2, 3});
  CHECK(out.size() == 6);
}

TEST_CASE("exhaustive batch on a uniform mdp reproduces the exact dropout value") {
  // 2 states, 2 actions, uniform transitions/policy/init, horizon 1:
  // 16 equally likely trajectories. With alpha in {0.25, 0.5} the retained
  // mass boundary falls exactly between trajectories, so the sample-side
  // estimator and the exact trajectory-space value must agree to 1e-9.
  RngStream rng(70);
  envs::DiscreteMDP mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.transition = {Matrix::Constant(2, 2, 0.5), Matrix::Constant(2, 2, 0.5)};
  mdp.reward.resize(2, 2);
  mdp.reward << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
  mdp.initial = Vector::Constant(2, 0.5);
  mdp.horizon = 1;
  mdp.gamma = 0.9;
  mdp.reward_sup = 1.0;
  const auto policy = envs::TabularPolicy::uniform(2, 2);

  // enumerate all 16 trajectories as rollouts of length 2 (t = 0, 1)
  std::vector<std::tuple<int, int, int, double>> rows;
  int rollout = 0;
  for (int s0 = 0; s0 < 2; ++s0)
    for (int a0 = 0; a0 < 2; ++a0)
      for (int s1 = 0; s1 < 2; ++s1)
        for (int a1 = 0; a1 < 2; ++a1) {
          rows.push_back({0, rollout, 0, mdp.reward(s0, a0)});
          rows.push_back({0, rollout, 1, mdp.reward(s1, a1)});
          ++rollout;
        }
  const RolloutBatch batch = make_batch(rows, 1);
  for (double alpha : {0.25, 0.5}) {
    const RolloutBatch filtered = rollout_dropout(batch, alpha, /*min_group_size=*/1,
                                                  DropoutGranularity::kPerTrajectory, mdp.gamma);
    const double estimate = dropout_return_estimate(filtered, mdp.gamma);
    const double exact = risk::exact_dropout_return(mdp, policy, alpha);
    CHECK(estimate == doctest::Approx(exact).epsilon(1e-9));
  }
}

TEST_CASE("generation error paths") {
  ReplayBuffer buf(400);
  EnsembleState ens = trained_tiny_ensemble(buf);
  FlatEnv env;
  PolicyFn policy = [](const Vector&, RngStream&) { return Vector::Zero(1); };
  CHECK_THROWS_AS(generate_rollouts(ens, policy, buf, env, static_cast<int>(buf.size()) + 1, 1, 1, 1),
                  std::invalid_argument);
  ens.retained.clear();
  CHECK_THROWS_AS(generate_rollouts(ens, policy, buf, env, 1, 1, 1, 1), std::runtime_error);
}
