#pragma once

#include <cstdint>
#include <vector>

#include "mbdp/agent/sac.hpp"
#include "mbdp/envs/env.hpp"

namespace mbdp {

struct EvalResult {
  double mean = 0.0;       // undiscounted episode return, sample mean
  double stddev = 0.0;     // population std over episodes
  double disc_mean = 0.0;  // gamma-discounted return, sample mean
  int blowups = 0;         // episodes that ended in a physics blow-up
  std::vector<double> returns;
};

/// Deterministic-mode (mean action) rollouts in the real environment.
/// Episodes run on independent env clones with derived seeds, so the result
/// is identical for any worker count. A blow-up ends the episode; its
/// accumulated return still counts and the episode is flagged.
EvalResult evaluate_policy(const SacAgent& agent, const envs::ContinuousEnv& env, int n_episodes,
                           double gamma, std::uint64_t seed, int workers = 1);

/// Same protocol with uniform-random actions; the baseline band new policies
/// are compared against.
EvalResult evaluate_random_policy(const envs::ContinuousEnv& env, int n_episodes, double gamma,
                                  std::uint64_t seed, int workers = 1);

}  // namespace mbdp
