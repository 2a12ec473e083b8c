#include "mbdp/envs/discrete_mdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mbdp::envs {

namespace {

void check_distribution_rows(const Matrix& m, const std::string& what, double tol) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if ((m.row(i).array() < -tol).any())
      throw std::invalid_argument(what + ": negative probability in row " + std::to_string(i));
    const double sum = m.row(i).sum();
    if (std::abs(sum - 1.0) > tol)
      throw std::invalid_argument(what + ": row " + std::to_string(i) + " sums to " +
                                  std::to_string(sum));
  }
}

Vector random_distribution(Eigen::Index n, RngStream& rng) {
  Vector v(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = -std::log(1.0 - rng.uniform());  // Exp(1): dense support, no zeros
    sum += v(i);
  }
  return v / sum;
}

}  // namespace

void DiscreteMDP::validate() const {
  if (n_states < 1 || n_actions < 1)
    throw std::invalid_argument("DiscreteMDP: need at least one state and action");
  if (static_cast<int>(transition.size()) != n_actions)
    throw std::invalid_argument("DiscreteMDP: transition must hold one matrix per action");
  for (int a = 0; a < n_actions; ++a) {
    if (transition[a].rows() != n_states || transition[a].cols() != n_states)
      throw std::invalid_argument("DiscreteMDP: transition matrix shape mismatch");
    check_distribution_rows(transition[a], "DiscreteMDP transition[a=" + std::to_string(a) + "]",
                            1e-12);
  }
  if (reward.rows() != n_states || reward.cols() != n_actions)
    throw std::invalid_argument("DiscreteMDP: reward table shape mismatch");
  if ((reward.array().abs() > reward_sup + 1e-12).any())
    throw std::invalid_argument("DiscreteMDP: |reward| exceeds reward_sup");
  if (initial.size() != n_states)
    throw std::invalid_argument("DiscreteMDP: initial distribution size mismatch");
  const double isum = initial.sum();
  if ((initial.array() < -1e-12).any() || std::abs(isum - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteMDP: initial is not a distribution");
  if (horizon < 0) throw std::invalid_argument("DiscreteMDP: horizon must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("DiscreteMDP: gamma must be in (0, 1]");
}

DiscreteMDP DiscreteMDP::random(int n_states, int n_actions, int horizon, double gamma,
                                double reward_sup, RngStream& rng) {
  DiscreteMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.horizon = horizon;
  mdp.gamma = gamma;
  mdp.reward_sup = reward_sup;
  mdp.transition.resize(n_actions, Matrix(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s)
      mdp.transition[a].row(s) = random_distribution(n_states, rng).transpose();
  mdp.reward.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      mdp.reward(s, a) = rng.uniform(-reward_sup, reward_sup);
  mdp.initial = random_distribution(n_states, rng);
  mdp.validate();
  return mdp;
}

void TabularPolicy::validate(int n_states, int n_actions) const {
  if (probs.rows() != n_states || probs.cols() != n_actions)
    throw std::invalid_argument("TabularPolicy: shape mismatch");
  check_distribution_rows(probs, "TabularPolicy", 1e-12);
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return {Matrix::Constant(n_states, n_actions, 1.0 / n_actions)};
}

TabularPolicy TabularPolicy::random(int n_states, int n_actions, RngStream& rng) {
  TabularPolicy p;
  p.probs.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    p.probs.row(s) = random_distribution(n_actions, rng).transpose();
  return p;
}

std::size_t enumeration_count(const DiscreteMDP& mdp) {
  // s0 x (a, s')^horizon x final action.
  double count = static_cast<double>(mdp.n_states) * mdp.n_actions;
  for (int t = 0; t < mdp.horizon; ++t)
    count *= static_cast<double>(mdp.n_actions) * mdp.n_states;
  if (count > 1e18) return static_cast<std::size_t>(1e18);
  return static_cast<std::size_t>(count);
}

namespace {

struct Enumerator {
  const DiscreteMDP& mdp;
  const TabularPolicy& policy;
  std::vector<risk::Atom> atoms;

  void visit(int state, int t, double prob, double ret, double discount) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy.probs(state, a);
      if (pa == 0.0) continue;
      const double new_ret = ret + discount * mdp.reward(state, a);
      const double new_prob = prob * pa;
      if (t == mdp.horizon) {
        atoms.push_back({new_ret, new_prob});
        continue;
      }
      for (int ns = 0; ns < mdp.n_states; ++ns) {
        const double pt = mdp.transition[a](state, ns);
        if (pt == 0.0) continue;
        visit(ns, t + 1, new_prob * pt, new_ret, discount * mdp.gamma);
      }
    }
  }
};

}  // namespace

risk::ReturnDistribution enumerate_returns(const DiscreteMDP& mdp, const TabularPolicy& policy,
                                           std::size_t cap) {
  mdp.validate();
  policy.validate(mdp.n_states, mdp.n_actions);
  const std::size_t required = enumeration_count(mdp);
  if (required > cap)
    throw std::invalid_argument("enumerate_returns: " + std::to_string(required) +
                                " trajectories required, cap is " + std::to_string(cap));
  Enumerator e{mdp, policy, {}};
  e.atoms.reserve(required);
  for (int s0 = 0; s0 < mdp.n_states; ++s0) {
    const double p0 = mdp.initial(s0);
    if (p0 == 0.0) continue;
    e.visit(s0, 0, p0, 0.0, 1.0);
  }
  return risk::ReturnDistribution::from_pairs(std::move(e.atoms));
}

}  // namespace mbdp::envs
