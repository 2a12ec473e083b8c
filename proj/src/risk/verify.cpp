#include "mbdp/risk/verify.hpp"

#include <algorithm>
#include <cmath>

#include "mbdp/envs/discrete_mdp.hpp"
#include "mbdp/risk/risk.hpp"
#include "mbdp/rng.hpp"

namespace mbdp::risk {

namespace {

struct Instance {
  envs::DiscreteMDP mdp;
  envs::TabularPolicy policy;
};

Instance random_instance(RngStream& rng) {
  const int n_s = 1 + static_cast<int>(rng.integer(4));
  const int n_a = 1 + static_cast<int>(rng.integer(3));
  const int horizon = 1 + static_cast<int>(rng.integer(4));
  const double gamma = rng.uniform(0.5, 0.99);
  const double r_sup = rng.uniform(0.5, 2.0);
  Instance inst{envs::DiscreteMDP::random(n_s, n_a, horizon, gamma, r_sup, rng),
                envs::TabularPolicy::random(n_s, n_a, rng)};
  return inst;
}

}  // namespace

std::vector<CheckResult> run_identity_checks(int trials, double tolerance, std::uint64_t seed) {
  const std::vector<double> alphas = {0.1, 0.25, 0.5};

  CheckResult three_way{"three-way equivalence (dropout = -cvar = reweighting)", 0, 0.0,
                        tolerance, false};
  CheckResult admissible{"greedy reweighting admissible and unbeaten", 0, 0.0, tolerance, false};
  CheckResult gap_bound{"|dropout - expected| within closed-form gap bound", 0, 0.0, tolerance,
                        false};
  CheckResult monotone_alpha{"dropout return nonincreasing in alpha", 0, 0.0, tolerance, false};
  CheckResult cvar_coherence{"cvar translation equivariance and homogeneity", 0, 0.0, tolerance,
                             false};
  CheckResult bound_monotone{"discrepancy bound monotone over parameter grid", 0, 0.0, tolerance,
                             false};

  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng(derive_seed(seed, 0x7E57, static_cast<std::uint64_t>(trial)));
    const Instance inst = random_instance(rng);
    const ReturnDistribution dist = envs::enumerate_returns(inst.mdp, inst.policy);
    const double expected = dist.expectation();

    for (double alpha : alphas) {
      const double via_dropout = dropout_value(dist, alpha);
      const double via_cvar = -cvar_split(dist.negated(), alpha);
      const ReweightingResult rw = worst_case_reweighting(dist, alpha);

      three_way.max_violation = std::max({three_way.max_violation,
                                          std::abs(via_dropout - via_cvar),
                                          std::abs(via_dropout - rw.value)});
      three_way.cases += 2;

      const PerturbationSet set{alpha};
      if (!set.admissible(dist, rw.delta))
        admissible.max_violation = std::max(admissible.max_violation, 1.0);
      ++admissible.cases;
      // Random feasible reweightings never undercut the greedy optimum.
      for (int probe = 0; probe < 8; ++probe) {
        std::vector<double> w(dist.atoms.size());
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          w[i] = rng.uniform() * dist.atoms[i].prob * set.density_bound();
          total += w[i];
        }
        if (total <= 0.0) continue;
        // Scale onto the simplex; rejection keeps the density bound honest.
        bool feasible = true;
        double value = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          w[i] /= total;
          if (w[i] > dist.atoms[i].prob * set.density_bound() * (1.0 + 1e-12)) feasible = false;
          value += w[i] * dist.atoms[i].value;
        }
        if (!feasible) continue;
        admissible.max_violation =
            std::max(admissible.max_violation, rw.value - value);
        ++admissible.cases;
      }

      const DropoutConfig cfg{alpha, 0.0, inst.mdp.gamma, inst.mdp.reward_sup};
      const double gap = std::abs(via_dropout - expected);
      gap_bound.max_violation =
          std::max(gap_bound.max_violation, gap - dropout_gap_bound(cfg));
      ++gap_bound.cases;
    }

    double prev = dropout_value(dist, 0.0);
    for (double alpha = 0.1; alpha < 0.95; alpha += 0.1) {
      const double cur = dropout_value(dist, alpha);
      monotone_alpha.max_violation = std::max(monotone_alpha.max_violation, cur - prev);
      prev = cur;
      ++monotone_alpha.cases;
    }

    // Coherence spot checks on the same distribution.
    const double c = rng.uniform(-2.0, 2.0);
    const double lambda = rng.uniform(0.1, 3.0);
    ReturnDistribution shifted = dist, scaled = dist;
    for (auto& a : shifted.atoms) a.value += c;
    for (auto& a : scaled.atoms) a.value *= lambda;
    for (double p : alphas) {
      cvar_coherence.max_violation =
          std::max({cvar_coherence.max_violation,
                    std::abs(cvar_p(shifted, p) - (cvar_p(dist, p) + c)),
                    std::abs(cvar_p(scaled, p) - lambda * cvar_p(dist, p))});
      cvar_coherence.cases += 2;
    }
  }

  {
    // Directional differences along each axis of a 5^5 grid.
    const std::vector<double> alphas_g = {0.0, 0.1, 0.2, 0.35, 0.5};
    const std::vector<double> betas_g = {0.0, 0.1, 0.2, 0.35, 0.5};
    const std::vector<double> eps_g = {0.0, 0.1, 0.5, 1.0, 2.0};
    const std::vector<double> k_g = {0.0, 0.5, 1.0, 2.0, 5.0};
    const std::vector<double> r_g = {0.1, 0.5, 1.0, 2.0, 5.0};
    const double gamma = 0.9;
    auto eval = [&](std::size_t ia, std::size_t ib, std::size_t ie, std::size_t ik,
                    std::size_t ir) {
      return discrepancy_bound({alphas_g[ia], betas_g[ib], gamma, r_g[ir]}, eps_g[ie], k_g[ik]);
    };
    double violation = 0.0;
    long cases = 0;
    for (std::size_t ia = 0; ia < 5; ++ia)
      for (std::size_t ib = 0; ib < 5; ++ib)
        for (std::size_t ie = 0; ie < 5; ++ie)
          for (std::size_t ik = 0; ik < 5; ++ik)
            for (std::size_t ir = 0; ir < 5; ++ir) {
              const double base = eval(ia, ib, ie, ik, ir);
              if (ia + 1 < 5) violation = std::max(violation, base - eval(ia + 1, ib, ie, ik, ir));
              if (ib + 1 < 5) violation = std::max(violation, eval(ia, ib + 1, ie, ik, ir) - base);
              if (ie + 1 < 5) violation = std::max(violation, base - eval(ia, ib, ie + 1, ik, ir));
              if (ik + 1 < 5) violation = std::max(violation, base - eval(ia, ib, ie, ik + 1, ir));
              if (ir + 1 < 5) violation = std::max(violation, base - eval(ia, ib, ie, ik, ir + 1));
              cases += 5;
            }
    bound_monotone.max_violation = trials > 0 ? violation : 0.0;
    bound_monotone.cases = trials > 0 ? cases : 0;
  }

  std::vector<CheckResult> results = {three_way,      admissible,     gap_bound,
                                      monotone_alpha, cvar_coherence, bound_monotone};
  for (CheckResult& r : results) r.pass = r.max_violation <= r.tolerance;
  return results;
}

}  // namespace mbdp::risk
