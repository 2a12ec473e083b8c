#pragma once

#include <cstdint>
#include <vector>

#include "mbdp/risk/return_distribution.hpp"
#include "mbdp/rng.hpp"
#include "mbdp/types.hpp"

namespace mbdp::envs {

/// Exactly enumerable finite MDP, the ground-truth oracle for the risk
/// identities. Actions are taken at t = 0..horizon, so a trajectory carries
/// horizon+1 reward terms; the state reached after the final action is never
/// branched (it cannot affect the return).
struct DiscreteMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Matrix> transition;  // transition[a](s, s') row-stochastic per (s, a)
  Matrix reward;                   // (n_states x n_actions), |r| <= reward_sup
  Vector initial;                  // distribution over start states
  int horizon = 1;
  double gamma = 0.99;
  double reward_sup = 1.0;

  /// Row-stochasticity within 1e-12, reward bound, initial distribution.
  void validate() const;

  static DiscreteMDP random(int n_states, int n_actions, int horizon, double gamma,
                            double reward_sup, RngStream& rng);
};

/// Explicit per-state action distribution.
struct TabularPolicy {
  Matrix probs;  // (n_states x n_actions), rows sum to 1

  void validate(int n_states, int n_actions) const;
  static TabularPolicy uniform(int n_states, int n_actions);
  static TabularPolicy random(int n_states, int n_actions, RngStream& rng);
};

/// Worst-case number of trajectories enumerate_returns may visit.
std::size_t enumeration_count(const DiscreteMDP& mdp);

/// Exhaustive trajectory-space sweep: the exact distribution of
/// sum_t gamma^t r(s_t, a_t). Throws when enumeration_count exceeds `cap`,
/// naming the required count.
risk::ReturnDistribution enumerate_returns(const DiscreteMDP& mdp, const TabularPolicy& policy,
                                           std::size_t cap = 1000000);

}  // namespace mbdp::envs
