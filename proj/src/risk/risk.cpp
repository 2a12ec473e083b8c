#include "mbdp/risk/risk.hpp"

#include <cmath>
#include <stdexcept>

#include "mbdp/rng.hpp"

namespace mbdp::risk {

namespace {

void check_level(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument(std::string(what) + ": level must be in (0, 1)");
}

}  // namespace

double var_p(const ReturnDistribution& dist, double p) {
  check_level(p, "var_p");
  dist.validate();
  double cum = 0.0;
  for (const Atom& a : dist.atoms) {
    cum += a.prob;
    // 1e-12 slack: the accumulated CDF carries float noise and the infimum
    // rule must not skip an atom whose exact cumulative mass reaches p.
    if (cum >= p - 1e-12) return a.value;
  }
  return dist.atoms.back().value;
}

double cvar_p(const ReturnDistribution& dist, double p) {
  const double var = var_p(dist, p);
  double mass = 0.0, acc = 0.0;
  for (const Atom& a : dist.atoms) {
    if (a.value >= var) {
      mass += a.prob;
      acc += a.prob * a.value;
    }
  }
  return acc / mass;
}

double cvar_split(const ReturnDistribution& dist, double p) {
  check_level(p, "cvar_split");
  dist.validate();
  const double tail = 1.0 - p;
  double remaining = tail, acc = 0.0;
  for (std::size_t i = dist.atoms.size(); i-- > 0;) {
    const Atom& a = dist.atoms[i];
    const double take = std::min(a.prob, remaining);
    acc += take * a.value;
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  return acc / tail;
}

double dropout_value(const ReturnDistribution& dist, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("dropout_value: alpha must be in [0, 1)");
  dist.validate();
  if (alpha == 0.0) return dist.expectation();
  const double keep = 1.0 - alpha;
  double remaining = keep, acc = 0.0;
  for (const Atom& a : dist.atoms) {
    const double take = std::min(a.prob, remaining);
    acc += take * a.value;
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  return acc / keep;
}

double exact_dropout_return(const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy,
                            double alpha, std::size_t cap) {
  return dropout_value(envs::enumerate_returns(mdp, policy, cap), alpha);
}

double exact_return(const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy,
                    std::size_t cap) {
  return envs::enumerate_returns(mdp, policy, cap).expectation();
}

bool PerturbationSet::admissible(const ReturnDistribution& dist, std::span<const double> delta,
                                 double tol) const {
  if (delta.size() != dist.atoms.size()) return false;
  double mean = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (delta[i] < -tol || delta[i] > density_bound() + tol) return false;
    mean += delta[i] * dist.atoms[i].prob;
  }
  return std::abs(mean - 1.0) <= tol;
}

ReweightingResult worst_case_reweighting(const ReturnDistribution& dist, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("worst_case_reweighting: alpha must be in [0, 1)");
  dist.validate();
  const double bound = 1.0 / (1.0 - alpha);
  ReweightingResult out;
  out.delta.assign(dist.atoms.size(), 0.0);
  // Fractional knapsack on the reweighted mass w_i = p_i * delta_i:
  // minimize sum w_i z_i subject to 0 <= w_i <= p_i * bound, sum w_i = 1.
  double budget = 1.0;
  for (std::size_t i = 0; i < dist.atoms.size() && budget > 0.0; ++i) {
    const double w = std::min(dist.atoms[i].prob * bound, budget);
    out.delta[i] = w / dist.atoms[i].prob;
    out.value += w * dist.atoms[i].value;
    budget -= w;
  }
  return out;
}

double adversarial_return(const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy,
                          double alpha, std::size_t cap) {
  const ReturnDistribution dist = envs::enumerate_returns(mdp, policy, cap);
  return worst_case_reweighting(dist, alpha).value;
}

double dropout_gap_bound(const DropoutConfig& cfg) {
  cfg.validate();
  return cfg.alpha * (1.0 + cfg.alpha) / ((1.0 - cfg.alpha) * (1.0 - cfg.gamma)) * cfg.reward_sup;
}

double discrepancy_bound(const DropoutConfig& cfg, double eps_m, double lipschitz_k) {
  cfg.validate();
  if (eps_m < 0.0 || lipschitz_k < 0.0)
    throw std::invalid_argument("discrepancy_bound: eps_m and lipschitz_k must be >= 0");
  const double model_term =
      (1.0 - cfg.beta) * cfg.gamma * lipschitz_k / (1.0 - cfg.gamma) * eps_m;
  const double dropout_term = cfg.alpha * (1.0 + cfg.alpha) * (1.0 - cfg.beta) /
                              ((1.0 - cfg.alpha) * (1.0 - cfg.gamma)) * cfg.reward_sup;
  return model_term + dropout_term;
}

double mean_model_bias(const EnsembleState& ens) {
  if (ens.members.empty()) throw std::invalid_argument("mean_model_bias: empty ensemble");
  double sum = 0.0;
  for (const DynamicsModel& m : ens.members) {
    if (m.bias_stale)
      throw std::runtime_error("mean_model_bias: member " + std::to_string(m.id) +
                               " has a stale bias");
    sum += m.bias;
  }
  return sum / static_cast<double>(ens.members.size());
}

Residual update_residual(double v_env, double v_alpha_model, double d_bound,
                         const DropoutConfig& cfg) {
  if (!std::isfinite(v_env) || !std::isfinite(v_alpha_model) || !std::isfinite(d_bound))
    throw std::invalid_argument("update_residual: inputs must be finite");
  Residual r;
  r.eps_k = v_env - (v_alpha_model - d_bound);
  r.eta = r.eps_k - dropout_gap_bound(cfg);
  return r;
}

double estimate_lipschitz(const std::function<double(const Vector&)>& value,
                          std::span<const Vector> states, int pair_budget, std::uint64_t seed) {
  if (states.size() < 2)
    throw std::invalid_argument("estimate_lipschitz: need at least two states");
  if (pair_budget < 1) throw std::invalid_argument("estimate_lipschitz: pair_budget must be >= 1");
  RngStream rng(seed);
  double best = 0.0;
  int used = 0;
  for (int t = 0; t < pair_budget; ++t) {
    const auto i = static_cast<std::size_t>(rng.integer(states.size()));
    const auto j = static_cast<std::size_t>(rng.integer(states.size()));
    const double dist = (states[i] - states[j]).norm();
    if (dist < 1e-12) continue;
    best = std::max(best, std::abs(value(states[i]) - value(states[j])) / dist);
    ++used;
  }
  if (used == 0) throw std::runtime_error("estimate_lipschitz: all sampled pairs coincident");
  return best;
}

}  // namespace mbdp::risk
