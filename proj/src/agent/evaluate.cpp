#include "mbdp/agent/evaluate.hpp"

#include <atomic>
#include <cmath>

#include "mbdp/parallel.hpp"

namespace mbdp {

namespace {

struct EpisodeOutcome {
  double ret = 0.0;
  double disc_ret = 0.0;
  bool blowup = false;
};

EpisodeOutcome run_episode(const envs::ContinuousEnv& proto, const PolicyFn& policy, double gamma,
                           std::uint64_t seed) {
  auto env = proto.clone();
  RngStream reset_rng(derive_seed(seed, 0xE9));
  RngStream action_rng(derive_seed(seed, 0xAC));
  env->reset(reset_rng);
  EpisodeOutcome out;
  double discount = 1.0;
  while (!env->episode_done()) {
    const Vector a = policy(env->state(), action_rng);
    try {
      const Transition t = env->step(a);
      out.ret += t.reward;
      out.disc_ret += discount * t.reward;
      discount *= gamma;
    } catch (const envs::PhysicsBlowup&) {
      out.blowup = true;
      break;
    }
  }
  return out;
}

EvalResult evaluate(const envs::ContinuousEnv& env, const PolicyFn& policy, int n_episodes,
                    double gamma, std::uint64_t seed, int workers) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
  std::vector<EpisodeOutcome> outcomes(static_cast<std::size_t>(n_episodes));
  parallel_for(outcomes.size(), workers, [&](std::size_t e) {
    outcomes[e] = run_episode(env, policy, gamma, derive_seed(seed, 0xE7A1, e));
  });
  EvalResult res;
  res.returns.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    res.returns.push_back(o.ret);
    res.mean += o.ret;
    res.disc_mean += o.disc_ret;
    res.blowups += o.blowup ? 1 : 0;
  }
  res.mean /= n_episodes;
  res.disc_mean /= n_episodes;
  double var = 0.0;
  for (double r : res.returns) var += (r - res.mean) * (r - res.mean);
  res.stddev = std::sqrt(var / n_episodes);
  return res;
}

}  // namespace

EvalResult evaluate_policy(const SacAgent& agent, const envs::ContinuousEnv& env, int n_episodes,
                           double gamma, std::uint64_t seed, int workers) {
  return evaluate(env, agent.policy(/*stochastic=*/false), n_episodes, gamma, seed, workers);
}

EvalResult evaluate_random_policy(const envs::ContinuousEnv& env, int n_episodes, double gamma,
                                  std::uint64_t seed, int workers) {
  const envs::ActionBox& box = env.action_box();
  PolicyFn random_policy = [&box](const Vector&, RngStream& rng) {
    Vector a(box.low.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(box.low(i), box.high(i));
    return a;
  };
  return evaluate(env, random_policy, n_episodes, gamma, seed, workers);
}

}  // namespace mbdp
