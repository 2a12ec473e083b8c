#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mbdp/ensemble.hpp"
#include "mbdp/envs/env.hpp"
#include "mbdp/replay_buffer.hpp"
#include "mbdp/types.hpp"

namespace mbdp {

/// Maps a state to an action; stochastic policies draw from the stream.
using PolicyFn = std::function<Vector(const Vector&, RngStream&)>;

struct RolloutSample {
  Transition transition;
  int group = 0;     // index of the start state this rollout began from
  int rollout = 0;   // rollout index within the group
  int timestep = 0;  // position along the rollout
};

/// Model-generated samples grouped by rollout start state. Groups are the
/// unit the percentile filter conditions on: exact state-conditioning is
/// degenerate in continuous spaces, so the k_per_start rollouts sharing one
/// start state form one group.
struct RolloutBatch {
  std::vector<RolloutSample> samples;
  int n_groups = 0;
  int horizon = 0;
  int k_per_start = 0;
  std::vector<double> thresholds;  // per-group cut values, filled by the filter
  int truncated_rollouts = 0;      // rollouts cut short by non-finite predictions

  std::size_t size() const { return samples.size(); }
};

enum class DropoutGranularity {
  kPerSample,     // rank individual samples by reward (default)
  kPerTrajectory  // rank whole rollouts by discounted return
};

/// Generates n_starts * k_per_start rollouts of length `horizon` from start
/// states drawn uniformly from d_env. Each step draws a retained ensemble
/// member uniformly; rewards come from the environment's known reward
/// function. A non-finite model prediction truncates that rollout and is
/// counted, not thrown.
RolloutBatch generate_rollouts(const EnsembleState& ens, const PolicyFn& policy,
                               const ReplayBuffer& d_env, const envs::ContinuousEnv& env,
                               int n_starts, int k_per_start, int horizon, std::uint64_t seed,
                               PredictMode mode = PredictMode::kSample, int workers = 1);

/// Nearest-rank percentile: sorted ascending, element at 1-based index
/// ceil((1 - alpha) * n). alpha = 0 returns the maximum.
double percentile_threshold(std::vector<double> rewards, double alpha);

/// Per-group pessimistic filter: within each group the ceil((1 - alpha) * n)
/// lowest-reward samples are retained (ties broken by batch order), so every
/// retained reward <= every dropped reward. Groups smaller than
/// min_group_size are kept whole. Per-trajectory granularity ranks whole
/// rollouts by their gamma-discounted return instead.
RolloutBatch rollout_dropout(const RolloutBatch& batch, double alpha, int min_group_size = 5,
                             DropoutGranularity granularity = DropoutGranularity::kPerSample,
                             double gamma = 1.0);

/// Mean over rollout fragments of sum_t gamma^t r_t, the empirical dropout
/// return. A fragment is the retained part of one rollout; rollouts with no
/// retained samples do not contribute.
double dropout_return_estimate(const RolloutBatch& batch, double gamma);

}  // namespace mbdp
