#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mbdp/ensemble.hpp"
#include "mbdp/envs/discrete_mdp.hpp"
#include "mbdp/risk/return_distribution.hpp"
#include "mbdp/types.hpp"

namespace mbdp::risk {

/// Value-at-risk at level p in (0, 1): the smallest atom whose cumulative
/// probability reaches p (the infimum form of the inverse CDF).
double var_p(const ReturnDistribution& dist, double p);

/// Conditional value-at-risk at level p: E[Z | Z >= VaR_p(Z)], with the
/// boundary atom's probability counted in full. This is the discrete
/// conditional-expectation convention, exposed as-is.
double cvar_p(const ReturnDistribution& dist, double p);

/// Tail mean of the top (1-p) probability mass with the boundary atom split
/// fractionally. On atomless distributions this coincides with cvar_p; on
/// atoms it is the convention under which the dropout/robustness identities
/// are exact, so the identity checks use this version on both sides.
double cvar_split(const ReturnDistribution& dist, double p);

/// Mean of the lowest (1-alpha) probability mass of `dist`, boundary atom
/// split fractionally. alpha = 0 gives the plain expectation.
double dropout_value(const ReturnDistribution& dist, double alpha);

/// dropout_value of the exact return distribution of (mdp, policy): the
/// trajectory-level value the sample-side dropout estimator approximates.
double exact_dropout_return(const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy,
                            double alpha, std::size_t cap = 1000000);

/// Plain expected return over the enumerated trajectory space.
double exact_return(const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy,
                    std::size_t cap = 1000000);

/// Admissible trajectory reweightings: densities delta with
/// E_P[delta] = 1 and delta <= density_bound(). The extremal (pessimistic)
/// member concentrates the full budget on the worst returns.
struct PerturbationSet {
  double alpha = 0.0;  // in (0, 1)

  double density_bound() const { return 1.0 / (1.0 - alpha); }
  /// delta admissible for the distribution's probabilities?
  bool admissible(const ReturnDistribution& dist, std::span<const double> delta,
                  double tol = 1e-9) const;
};

struct ReweightingResult {
  double value = 0.0;
  std::vector<double> delta;  // per-atom density, aligned with dist.atoms
};

/// Solves min E[delta Z] over the perturbation set by the greedy tail
/// construction: density_bound on the worst returns until the probability
/// budget is spent, fractional at the boundary. The optimum of this
/// fractional-knapsack program equals dropout_value(dist, alpha).
ReweightingResult worst_case_reweighting(const ReturnDistribution& dist, double alpha);

/// The reweighting extremum on the exact return distribution of (mdp, policy).
double adversarial_return(const envs::DiscreteMDP& mdp, const envs::TabularPolicy& policy,
                          double alpha, std::size_t cap = 1000000);

/// Closed-form bound on |dropout return - full return| for one model:
/// alpha (1 + alpha) / ((1 - alpha)(1 - gamma)) * reward_sup.
double dropout_gap_bound(const DropoutConfig& cfg);

/// Closed-form discrepancy bound between the double-dropout model return and
/// the true environment return:
/// (1-beta) gamma K / (1-gamma) * eps_m
///   + alpha (1+alpha)(1-beta) / ((1-alpha)(1-gamma)) * reward_sup.
double discrepancy_bound(const DropoutConfig& cfg, double eps_m, double lipschitz_k);

/// Mean bias over the full ensemble, dropped members included (model
/// selection narrows rollouts, not this estimate). Any stale bias is an
/// error so the estimate can never mix epochs.
double mean_model_bias(const EnsembleState& ens);

struct Residual {
  double eps_k = 0.0;  // v_env - (v_alpha_model - d_bound)
  double eta = 0.0;    // eps_k - dropout_gap_bound
};

Residual update_residual(double v_env, double v_alpha_model, double d_bound,
                         const DropoutConfig& cfg);

/// Max over sampled state pairs of |V(s) - V(s')| / ||s - s'||. A seeded,
/// budgeted lower-bound estimate; growing the budget extends the same pair
/// sequence, so the estimate is nondecreasing in the budget. Coincident
/// pairs are skipped; throws when every sampled pair is coincident.
double estimate_lipschitz(const std::function<double(const Vector&)>& value,
                          std::span<const Vector> states, int pair_budget, std::uint64_t seed);

/// Per-epoch quantitative ledger row.
struct BoundsReport {
  int epoch = 0;
  double eps_alpha = 0.0;
  double eps_m = 0.0;
  double lipschitz_k = 0.0;
  bool k_estimated = false;
  double d_alpha_beta = 0.0;
  double v_env = 0.0;          // discounted evaluation estimate
  double v_alpha_model = 0.0;  // dropout-batch return estimate
  double eps_k = 0.0;
  double eta = 0.0;
};

}  // namespace mbdp::risk
