#include "mbdp/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "mbdp/parallel.hpp"

namespace mbdp {

RolloutBatch generate_rollouts(const EnsembleState& ens, const PolicyFn& policy,
                               const ReplayBuffer& d_env, const envs::ContinuousEnv& env,
                               int n_starts, int k_per_start, int horizon, std::uint64_t seed,
                               PredictMode mode, int workers) {
  if (ens.retained.empty()) throw std::runtime_error("generate_rollouts: no retained members");
  if (n_starts < 1 || k_per_start < 1 || horizon < 1)
    throw std::invalid_argument("generate_rollouts: n_starts, k_per_start, horizon must be >= 1");
  if (d_env.size() < static_cast<std::size_t>(n_starts))
    throw std::invalid_argument("generate_rollouts: buffer smaller than n_starts");

  const auto start_idx =
      d_env.sample_indices(static_cast<std::size_t>(n_starts), derive_seed(seed, 0x57A7));
  std::vector<Vector> starts;
  starts.reserve(start_idx.size());
  for (std::size_t i : start_idx) starts.push_back(d_env.at(i).state);

  RolloutBatch batch;
  batch.n_groups = n_starts;
  batch.horizon = horizon;
  batch.k_per_start = k_per_start;

  // Each (start, rollout) pair owns a derived stream and an output slot, so
  // the result is independent of the worker count.
  std::vector<std::vector<RolloutSample>> slots(
      static_cast<std::size_t>(n_starts) * static_cast<std::size_t>(k_per_start));
  std::atomic<int> truncated{0};
  parallel_for(slots.size(), workers, [&](std::size_t slot) {
    const int g = static_cast<int>(slot) / k_per_start;
    const int k = static_cast<int>(slot) % k_per_start;
    RngStream rng(derive_seed(seed, 0x0477, static_cast<std::uint64_t>(g),
                              static_cast<std::uint64_t>(k)));
    Vector s = starts[static_cast<std::size_t>(g)];
    std::vector<RolloutSample>& out = slots[slot];
    out.reserve(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
      const Vector a = env.action_box().clip(policy(s, rng));
      const double r = env.reward(s, a);
      Vector next = ensemble_predict(ens, s, a, rng, mode);
      if (!next.allFinite()) {
        truncated.fetch_add(1);
        break;
      }
      const bool terminal = env.is_terminal(next);
      out.push_back({Transition{s, a, r, next, terminal}, g, k, t});
      if (terminal) break;
      s = std::move(next);
    }
  });
  for (auto& slot : slots)
    for (auto& sample : slot) batch.samples.push_back(std::move(sample));
  batch.truncated_rollouts = truncated.load();
  return batch;
}

double percentile_threshold(std::vector<double> rewards, double alpha) {
  if (rewards.empty()) throw std::invalid_argument("percentile_threshold: empty sequence");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("percentile_threshold: alpha must be in [0, 1)");
  for (double r : rewards)
    if (!std::isfinite(r)) throw std::invalid_argument("percentile_threshold: non-finite reward");
  std::sort(rewards.begin(), rewards.end());
  const long rank = std::clamp<long>(
      ceil_count((1.0 - alpha) * static_cast<double>(rewards.size())), 1,
      static_cast<long>(rewards.size()));
  return rewards[static_cast<std::size_t>(rank - 1)];
}

namespace {

/// Stable ascending order of `keys`; ties keep their original position, so
/// the boundary cut is deterministic and retention counts stay exact.
std::vector<std::size_t> stable_order(const std::vector<double>& keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return order;
}

}  // namespace

RolloutBatch rollout_dropout(const RolloutBatch& batch, double alpha, int min_group_size,
                             DropoutGranularity granularity, double gamma) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("rollout_dropout: alpha must be in [0, 1)");
  RolloutBatch out;
  out.n_groups = batch.n_groups;
  out.horizon = batch.horizon;
  out.k_per_start = batch.k_per_start;
  out.truncated_rollouts = batch.truncated_rollouts;
  out.thresholds.assign(static_cast<std::size_t>(std::max(batch.n_groups, 0)),
                        std::numeric_limits<double>::quiet_NaN());

  std::vector<char> keep(batch.samples.size(), 0);

  if (granularity == DropoutGranularity::kPerSample) {
    // group -> positions of its samples, in batch order
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < batch.samples.size(); ++i)
      groups[batch.samples[i].group].push_back(i);
    for (const auto& [g, positions] : groups) {
      const long n = static_cast<long>(positions.size());
      if (n < min_group_size) {
        for (std::size_t p : positions) keep[p] = 1;
        double mx = batch.samples[positions[0]].transition.reward;
        for (std::size_t p : positions) mx = std::max(mx, batch.samples[p].transition.reward);
        if (g >= 0 && g < batch.n_groups) out.thresholds[static_cast<std::size_t>(g)] = mx;
        continue;
      }
      std::vector<double> rewards(positions.size());
      for (std::size_t j = 0; j < positions.size(); ++j)
        rewards[j] = batch.samples[positions[j]].transition.reward;
      const auto order = stable_order(rewards);
      const long m = std::clamp<long>(ceil_count((1.0 - alpha) * static_cast<double>(n)), 1, n);
      for (long j = 0; j < m; ++j) keep[positions[order[static_cast<std::size_t>(j)]]] = 1;
      if (g >= 0 && g < batch.n_groups)
        out.thresholds[static_cast<std::size_t>(g)] = rewards[order[static_cast<std::size_t>(m - 1)]];
    }
  } else {
    // Rank whole rollouts within each group by discounted return.
    std::map<std::pair<int, int>, std::vector<std::size_t>> rollouts;
    for (std::size_t i = 0; i < batch.samples.size(); ++i)
      rollouts[{batch.samples[i].group, batch.samples[i].rollout}].push_back(i);
    std::map<int, std::vector<std::pair<double, std::pair<int, int>>>> by_group;
    for (const auto& [key, positions] : rollouts) {
      double ret = 0.0;
      for (std::size_t p : positions)
        ret += std::pow(gamma, batch.samples[p].timestep) * batch.samples[p].transition.reward;
      by_group[key.first].push_back({ret, key});
    }
    for (auto& [g, entries] : by_group) {
      const long n = static_cast<long>(entries.size());
      std::vector<double> rets(entries.size());
      for (std::size_t j = 0; j < entries.size(); ++j) rets[j] = entries[j].first;
      long m = n;
      if (n >= min_group_size)
        m = std::clamp<long>(ceil_count((1.0 - alpha) * static_cast<double>(n)), 1, n);
      const auto order = stable_order(rets);
      for (long j = 0; j < m; ++j)
        for (std::size_t p : rollouts[entries[order[static_cast<std::size_t>(j)]].second])
          keep[p] = 1;
      if (g >= 0 && g < batch.n_groups)
        out.thresholds[static_cast<std::size_t>(g)] = rets[order[static_cast<std::size_t>(m - 1)]];
    }
  }

  out.samples.reserve(batch.samples.size());
  for (std::size_t i = 0; i < batch.samples.size(); ++i)
    if (keep[i]) out.samples.push_back(batch.samples[i]);
  return out;
}

double dropout_return_estimate(const RolloutBatch& batch, double gamma) {
  if (batch.samples.empty()) throw std::invalid_argument("dropout_return_estimate: empty batch");
  std::map<std::pair<int, int>, double> fragments;
  for (const RolloutSample& s : batch.samples)
    fragments[{s.group, s.rollout}] += std::pow(gamma, s.timestep) * s.transition.reward;
  double sum = 0.0;
  for (const auto& [key, ret] : fragments) sum += ret;
  return sum / static_cast<double>(fragments.size());
}

}  // namespace mbdp
