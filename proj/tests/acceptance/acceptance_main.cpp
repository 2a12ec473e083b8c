// Acceptance suite: every release criterion, one pass/fail line each.
// Criterion 8 is soft (warn-only); every other failure is fatal for the
// process exit code. Filter by id: `acceptance 1 4 10`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mbdp/agent/evaluate.hpp"
#include "mbdp/agent/experiments.hpp"
#include "mbdp/agent/trainer.hpp"
#include "mbdp/envs/discrete_mdp.hpp"
#include "mbdp/risk/risk.hpp"
#include "mbdp/rollout.hpp"
#include "test_util.hpp"

using namespace mbdp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  bool warn_only = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// criteria 1 + 2 share the MDP population

struct Population {
  std::vector<envs::DiscreteMDP> mdps;
  std::vector<envs::TabularPolicy> policies;
};

Population make_population(int n, std::uint64_t seed) {
  Population pop;
  for (int t = 0; t < n; ++t) {
    RngStream rng(derive_seed(seed, 0xACC, t));
    const int ns = 1 + static_cast<int>(rng.integer(4));   // <= 4 states
    const int na = 1 + static_cast<int>(rng.integer(3));   // <= 3 actions
    const int T = 1 + static_cast<int>(rng.integer(4));    // <= 4
    const double gamma = rng.uniform(0.5, 0.99);
    const double r_sup = rng.uniform(0.5, 2.0);
    pop.mdps.push_back(envs::DiscreteMDP::random(ns, na, T, gamma, r_sup, rng));
    pop.policies.push_back(envs::TabularPolicy::random(ns, na, rng));
  }
  return pop;
}

Outcome criterion_1(const Population& pop) {
  const auto t0 = Clock::now();
  double max_violation = 0.0;
  for (std::size_t i = 0; i < pop.mdps.size(); ++i) {
    const auto dist = envs::enumerate_returns(pop.mdps[i], pop.policies[i]);
    for (double alpha : {0.1, 0.25, 0.5}) {
      const double direct = risk::dropout_value(dist, alpha);
      const double via_cvar = -risk::cvar_split(dist.negated(), alpha);
      const double via_adversary = risk::worst_case_reweighting(dist, alpha).value;
      max_violation = std::max({max_violation, std::abs(direct - via_cvar),
                                std::abs(direct - via_adversary)});
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = max_violation < 1e-9 && elapsed < 30.0;
  out.detail = "max violation " + fmt(max_violation) + " (tol 1e-9), " +
               std::to_string(pop.mdps.size()) + " MDPs x 3 alphas in " + fmt(elapsed) + " s";
  return out;
}

Outcome criterion_2(const Population& pop) {
  const auto t0 = Clock::now();
  int violations = 0;
  double worst_margin = 0.0;
  for (std::size_t i = 0; i < pop.mdps.size(); ++i) {
    const auto dist = envs::enumerate_returns(pop.mdps[i], pop.policies[i]);
    const double v = dist.expectation();
    for (double alpha : {0.1, 0.25, 0.5}) {
      const DropoutConfig cfg{alpha, 0.0, pop.mdps[i].gamma, pop.mdps[i].reward_sup};
      const double gap = std::abs(risk::dropout_value(dist, alpha) - v);
      const double slack = gap - risk::dropout_gap_bound(cfg);
      worst_margin = std::max(worst_margin, slack);
      if (slack > 0.0) ++violations;
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = violations == 0 && elapsed < 30.0;
  out.detail = std::to_string(violations) + " violations, worst slack " + fmt(worst_margin) +
               ", " + fmt(elapsed) + " s";
  return out;
}

Outcome criterion_3() {
  const double value = risk::discrepancy_bound({0.2, 0.2, 0.9, 1.0}, 0.5, 1.0);
  Outcome out;
  const double error = std::abs(value - 6.0);
  bool monotone = true;
  const std::vector<double> alphas = {0.0, 0.1, 0.2, 0.35, 0.5};
  const std::vector<double> betas = {0.0, 0.1, 0.2, 0.35, 0.5};
  const std::vector<double> eps = {0.0, 0.1, 0.5, 1.0, 2.0};
  const std::vector<double> ks = {0.0, 0.5, 1.0, 2.0, 5.0};
  const std::vector<double> rs = {0.1, 0.5, 1.0, 2.0, 5.0};
  auto bound = [&](int ia, int ib, int ie, int ik, int ir) {
    return risk::discrepancy_bound({alphas[ia], betas[ib], 0.9, rs[ir]}, eps[ie], ks[ik]);
  };
  for (int ia = 0; ia < 5; ++ia)
    for (int ib = 0; ib < 5; ++ib)
      for (int ie = 0; ie < 5; ++ie)
        for (int ik = 0; ik < 5; ++ik)
          for (int ir = 0; ir < 5; ++ir) {
            const double b = bound(ia, ib, ie, ik, ir);
            if (ia + 1 < 5 && bound(ia + 1, ib, ie, ik, ir) < b - 1e-12) monotone = false;
            if (ib + 1 < 5 && bound(ia, ib + 1, ie, ik, ir) > b + 1e-12) monotone = false;
            if (ie + 1 < 5 && bound(ia, ib, ie + 1, ik, ir) < b - 1e-12) monotone = false;
            if (ik + 1 < 5 && bound(ia, ib, ie, ik + 1, ir) < b - 1e-12) monotone = false;
            if (ir + 1 < 5 && bound(ia, ib, ie, ik, ir + 1) < b - 1e-12) monotone = false;
          }
  out.pass = error < 1e-12 && monotone;
  out.detail = "value " + fmt(value) + " (|err| " + fmt(error) + " vs 6.0), 5^5 grid monotone: " +
               (monotone ? "yes" : "NO");
  return out;
}

Outcome criterion_4() {
  const auto t0 = Clock::now();
  RngStream rng(404);
  long count_mismatches = 0, pessimism_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    RolloutBatch batch;
    const int n_groups = 1 + static_cast<int>(rng.integer(4));
    batch.n_groups = n_groups;
    std::map<int, int> sizes;
    for (int g = 0; g < n_groups; ++g) {
      sizes[g] = 5 + static_cast<int>(rng.integer(40));
      for (int i = 0; i < sizes[g]; ++i) {
        RolloutSample s;
        s.transition = testutil::make_transition({0.0}, {0.0}, rng.uniform(-1, 1), {0.0});
        s.group = g;
        s.rollout = i;
        s.timestep = 0;
        batch.samples.push_back(s);
      }
    }
    const double alpha = rng.uniform(0.0, 0.9);
    const RolloutBatch kept = rollout_dropout(batch, alpha, 5);
    std::map<int, std::multiset<double>> kept_rewards, all_rewards;
    for (const auto& s : batch.samples) all_rewards[s.group].insert(s.transition.reward);
    for (const auto& s : kept.samples) kept_rewards[s.group].insert(s.transition.reward);
    for (int g = 0; g < n_groups; ++g) {
      const long expected = ceil_count((1.0 - alpha) * sizes[g]);
      if (static_cast<long>(kept_rewards[g].size()) != expected) ++count_mismatches;
      auto rest = all_rewards[g];
      for (double r : kept_rewards[g]) rest.erase(rest.find(r));
      if (!rest.empty() && !kept_rewards[g].empty() &&
          *kept_rewards[g].rbegin() > *rest.begin() + 1e-15)
        ++pessimism_violations;
    }
  }

  // model-dropout invariants over random bias vectors
  long cardinality = 0, ordering = 0, nesting = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(12));
    EnsembleState ens = make_ensemble(n, 1, 1, {2}, 1e-3, derive_seed(405, trial));
    for (auto& m : ens.members) {
      m.bias = rng.uniform(0.0, 3.0);
      m.bias_stale = false;
    }
    const double b1 = rng.uniform(0.0, 0.95);
    const double b2 = rng.uniform(b1, 0.95);
    model_dropout(ens, b1);
    const std::set<int> phi1(ens.retained.begin(), ens.retained.end());
    if (static_cast<long>(phi1.size()) !=
        std::clamp<long>(ceil_count((1.0 - b1) * n), 1, n))
      ++cardinality;
    double max_kept = -1, min_dropped = 1e18;
    for (int i = 0; i < n; ++i) {
      const double bias = ens.members[static_cast<std::size_t>(i)].bias;
      if (phi1.count(i))
        max_kept = std::max(max_kept, bias);
      else
        min_dropped = std::min(min_dropped, bias);
    }
    if (phi1.size() < static_cast<std::size_t>(n) && max_kept > min_dropped) ++ordering;
    model_dropout(ens, b2);
    for (int id : ens.retained)
      if (!phi1.count(id)) ++nesting;
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = count_mismatches == 0 && pessimism_violations == 0 && cardinality == 0 &&
             ordering == 0 && nesting == 0 && elapsed < 10.0;
  out.detail = "rollout count/pessimism violations " + std::to_string(count_mismatches) + "/" +
               std::to_string(pessimism_violations) + ", model cardinality/ordering/nesting " +
               std::to_string(cardinality) + "/" + std::to_string(ordering) + "/" +
               std::to_string(nesting) + ", " + fmt(elapsed) + " s";
  return out;
}

Outcome criterion_5() {
  RngStream rng(505);
  double worst = 0.0;
  int probes = 0;

  for (int probe = 0; probe < 20; ++probe) {
    const nn::Mlp net = nn::Mlp::random_init({5, 16, 16, 6}, rng);
    const Matrix x = rng.normal_matrix(5, 8);
    const Matrix target = rng.normal_matrix(3, 8);
    auto loss = [&](const nn::Mlp& m, nn::Mlp* grads) {
      nn::Mlp::Trace trace;
      const Matrix raw = m.forward(x, trace);
      Matrix grad_raw;
      const double v = nn::gaussian_nll(raw, target, grads ? &grad_raw : nullptr);
      if (grads) m.backward(grad_raw, trace, *grads);
      return v;
    };
    worst = std::max(worst, testutil::fd_check(net, loss).max_rel_err);
    ++probes;
  }

  for (int probe = 0; probe < 20; ++probe) {
    const nn::Mlp critic = nn::Mlp::random_init({5, 12, 1}, rng);
    const Matrix input = rng.normal_matrix(5, 6);
    const Eigen::RowVectorXd targets = rng.normal_matrix(1, 6).row(0);
    auto loss = [&](const nn::Mlp& net, nn::Mlp* grads) {
      return critic_loss(net, input, targets, grads);
    };
    worst = std::max(worst, testutil::fd_check(critic, loss).max_rel_err);
    ++probes;
  }

  const envs::ActionBox box{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  for (int probe = 0; probe < 20; ++probe) {
    const nn::Mlp actor = nn::Mlp::random_init({3, 10, 4}, rng);
    const nn::Mlp critic1 = nn::Mlp::random_init({5, 10, 1}, rng);
    const nn::Mlp critic2 = nn::Mlp::random_init({5, 10, 1}, rng);
    const Matrix states = rng.normal_matrix(3, 5);
    const Matrix eps = rng.normal_matrix(2, 5);
    auto loss = [&](const nn::Mlp& net, nn::Mlp* grads) {
      return actor_loss(net, critic1, critic2, states, eps, box, 0.1, grads);
    };
    worst = std::max(worst, testutil::fd_check(actor, loss).max_rel_err);
    ++probes;
  }

  Outcome out;
  out.pass = worst < 1e-4;
  out.detail = "max relative error " + fmt(worst) + " over " + std::to_string(probes) +
               " probes x 3 losses (tol 1e-4)";
  return out;
}

Outcome criterion_6() {
  RngStream rng(606);
  const testutil::LinearSystem sys = testutil::LinearSystem::random(3, 2, rng);
  ReplayBuffer buf(6000);
  sys.fill(buf, 5000, 607);
  EnsembleState ens = make_ensemble(3, 3, 2, {64, 64}, 1e-3, 608);
  const DataSplit split = DataSplit::make(buf.size(), 0.2, 609);
  train_ensemble(ens, buf, split, 3000, 256, 610, /*workers=*/3);
  std::vector<Transition> validation;
  for (std::size_t i : split.validation) validation.push_back(buf.at(i));

  double best_mse = 1e18;
  for (const auto& m : ens.members) {
    double mse = 0.0;
    for (const Transition& t : validation) {
      const Vector pred = m.mean_next_state(t.state, t.action);
      mse += (pred - t.next_state).squaredNorm() / t.state.size();
    }
    best_mse = std::min(best_mse, mse / static_cast<double>(validation.size()));
  }

  // exact model and offset model bias values
  RngStream init(611);
  DynamicsModel exact(3, 2, {}, 1e-3, 0, init);
  exact.net.set_zero();
  exact.net.layers[0].W.topLeftCorner(3, 3) = sys.A - Matrix::Identity(3, 3);
  exact.net.layers[0].W.topRightCorner(3, 2) = sys.B;
  exact.net.layers[0].b.head(3) = sys.c;
  const double zero_bias = compute_bias(exact, validation);
  Vector offset(3);
  offset << 0.25, -0.5, 0.75;
  exact.net.layers[0].b.head(3) += offset;
  const double offset_bias = compute_bias(exact, validation);

  Outcome out;
  out.pass = best_mse < 1e-3 && zero_bias < 1e-12 &&
             std::abs(offset_bias - offset.norm()) < 1e-12;
  out.detail = "validation MSE " + fmt(best_mse) + " (tol 1e-3), exact-model bias " +
               fmt(zero_bias) + ", offset bias error " + fmt(std::abs(offset_bias - offset.norm()));
  return out;
}

TrainConfig pendulum_config(double alpha, double beta, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.env_name = "pendulum";
  cfg.seed = seed;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.epochs = 40;
  cfg.env_steps_per_epoch = 250;
  cfg.init_explore_steps = 1000;
  cfg.eval_episodes = 10;
  cfg.checkpoint_interval = 0;
  cfg.ensemble_size = 5;
  cfg.model_hidden = {64, 64};
  cfg.model_train_steps = 100;
  cfg.model_batch = 256;
  cfg.n_starts = 256;
  cfg.k_per_start = 8;
  cfg.rollout_horizon = 3;
  cfg.policy_hidden = {64, 64};
  cfg.policy_batch = 128;
  cfg.policy_updates_per_env_step = 4;
  cfg.entropy_weight = 0.02;
  cfg.gamma = 0.99;
  return cfg;
}

struct TrainedRun {
  TrainResult result;
  double elapsed = 0.0;
};

TrainedRun g_run7;        // shared between criteria 7 and 8
bool g_run7_done = false;

Outcome criterion_7() {
  const auto t0 = Clock::now();
  const TrainConfig cfg = pendulum_config(0.2, 0.2, 1);
  g_run7.result = mbdp_train(cfg);
  g_run7.elapsed = seconds_since(t0);
  g_run7_done = true;

  const auto env = envs::make_env("pendulum");
  const EvalResult baseline = evaluate_random_policy(*env, 20, cfg.gamma, 12345);
  const double bar = baseline.mean + 3.0 * baseline.stddev;
  const double final_return = g_run7.result.rows.back().eval_mean;

  const auto t1 = Clock::now();
  TrainConfig reduction = cfg;
  reduction.alpha = 0.0;
  reduction.beta = 0.0;
  const TrainResult red = mbdp_train(reduction);
  const double red_elapsed = seconds_since(t1);
  bool reduction_clean = red.rows.size() == static_cast<std::size_t>(reduction.epochs);
  for (const EpochRow& row : red.rows)
    reduction_clean = reduction_clean && row.retained_samples == row.generated_samples &&
                      row.retained_models == reduction.ensemble_size;

  Outcome out;
  const bool in_budget = g_run7.elapsed < 1200.0 && red_elapsed < 1200.0;
  out.pass = final_return > bar && reduction_clean && in_budget;
  out.detail = "final return " + fmt(final_return) + " vs bar " + fmt(bar) + " (baseline " +
               fmt(baseline.mean) + " +- " + fmt(baseline.stddev) + "), train " +
               fmt(g_run7.elapsed) + " s, reduction run " + fmt(red_elapsed) + " s" +
               (reduction_clean ? "" : ", REDUCTION VIOLATED");
  return out;
}

Outcome criterion_8() {
  Outcome out;
  out.warn_only = true;
  if (!g_run7_done) {
    out.pass = false;
    out.detail = "criterion 7 run unavailable";
    return out;
  }
  const auto& rows = g_run7.result.rows;
  long positive = 0, counted = 0;
  const std::size_t half = (rows.size() + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    if (!rows[i].bounds_valid) continue;
    ++counted;
    if (rows[i].bounds.eta > 0.0) ++positive;
  }
  out.pass = counted > 0 && 2 * positive > counted;
  out.detail = "eta > 0 in " + std::to_string(positive) + "/" + std::to_string(counted) +
               " first-half epochs" + (out.pass ? "" : " (soft criterion: warning only)");
  return out;
}

Outcome criterion_9() {
  const std::vector<std::pair<double, double>> variants = {
      {0.0, 0.0}, {0.2, 0.0}, {0.0, 0.2}, {0.2, 0.2}};
  const std::vector<double> coeffs = {0.8, 1.0, 1.2};
  const fs::path dir = fs::temp_directory_path() / "mbdp_acceptance_grids";
  fs::remove_all(dir);
  fs::create_directories(dir);

  bool all_ok = true;
  std::string notes;
  for (const auto& [alpha, beta] : variants) {
    TrainConfig cfg = pendulum_config(alpha, beta, 2);
    cfg.epochs = 3;  // artifact completeness is the assertion, not training quality
    cfg.env_steps_per_epoch = 150;
    cfg.eval_episodes = 2;
    const TrainResult run = mbdp_train(cfg);
    const GridResult grid = robustness_grid(*run.agent, cfg.env_name, coeffs, coeffs, 2,
                                            cfg.gamma, derive_seed(cfg.seed, 0x96D));
    char name[64];
    std::snprintf(name, sizeof(name), "grid_a%02d_b%02d.csv", static_cast<int>(alpha * 100),
                  static_cast<int>(beta * 100));
    write_grid_csv(grid, (dir / name).string());

    const bool complete = grid.mean_returns.rows() == 3 && grid.mean_returns.cols() == 3 &&
                          grid.mean_returns.allFinite();
    // schema: header + 3 labeled rows, 4 columns each
    std::ifstream in(dir / name);
    std::string line;
    int lines = 0, bad_cols = 0;
    while (std::getline(in, line)) {
      ++lines;
      const long commas = std::count(line.begin(), line.end(), ',');
      if (commas != 3) ++bad_cols;
    }
    const bool schema_ok = lines == 4 && bad_cols == 0;
    all_ok = all_ok && complete && schema_ok;
    notes += fmt(alpha) + "/" + fmt(beta) + (complete && schema_ok ? " ok " : " BAD ");
  }
  Outcome out;
  out.pass = all_ok;
  out.detail = "variants (alpha/beta): " + notes + "-> " + dir.string();
  return out;
}

Outcome criterion_10() {
  const fs::path dir = fs::temp_directory_path() / "mbdp_acceptance_repro";
  fs::remove_all(dir);
  TrainConfig cfg = pendulum_config(0.2, 0.2, 3);
  cfg.epochs = 3;
  cfg.env_steps_per_epoch = 150;
  cfg.eval_episodes = 3;
  cfg.workers = 1;

  auto run_to = [&](const std::string& out_dir) {
    fs::create_directories(out_dir);
    mbdp_train(cfg, out_dir);
    std::ifstream in(out_dir + "/metrics.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = run_to((dir / "a").string());
  const std::string b = run_to((dir / "b").string());
  Outcome out;
  out.pass = !a.empty() && a == b;
  out.detail = out.pass ? "metrics.csv byte-identical across reruns (" +
                              std::to_string(a.size()) + " bytes)"
                        : "metrics.csv DIFFERS between identical-manifest runs";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto enabled = [&](int id) { return only.empty() || only.count(id) > 0; };

  std::vector<std::pair<int, std::function<Outcome()>>> criteria;
  Population pop;  // built lazily for 1/2
  if (enabled(1) || enabled(2)) pop = make_population(100, 42);
  criteria.emplace_back(1, [&pop] { return criterion_1(pop); });
  criteria.emplace_back(2, [&pop] { return criterion_2(pop); });
  criteria.emplace_back(3, [] { return criterion_3(); });
  criteria.emplace_back(4, [] { return criterion_4(); });
  criteria.emplace_back(5, [] { return criterion_5(); });
  criteria.emplace_back(6, [] { return criterion_6(); });
  criteria.emplace_back(7, [] { return criterion_7(); });
  criteria.emplace_back(8, [] { return criterion_8(); });
  criteria.emplace_back(9, [] { return criterion_9(); });
  criteria.emplace_back(10, [] { return criterion_10(); });

  static const char* names[] = {
      "",
      "three-way dropout/cvar/reweighting equivalence",
      "dropout gap bound holds on the MDP population",
      "discrepancy bound value and monotonicity",
      "dropout mechanics invariants",
      "gradient fidelity vs finite differences",
      "model learning sanity on a known linear system",
      "end-to-end pendulum training beats the random baseline",
      "residual trace positive for most early epochs (soft)",
      "robustness grid artifact for all four variants",
      "bit-identical metrics across identical-manifest reruns",
  };

  int hard_failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!enabled(id)) continue;
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const char* tag = out.pass ? "PASS" : (out.warn_only ? "WARN" : "FAIL");
    std::printf("[%s] criterion %2d: %s - %s\n", tag, id, names[id], out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass && !out.warn_only) ++hard_failures;
  }
  if (hard_failures > 0) {
    std::printf("%d criterion(s) failed\n", hard_failures);
    return 1;
  }
  std::printf("all hard criteria passed\n");
  return 0;
}
