#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mbdp::risk {

struct CheckResult {
  std::string name;
  long cases = 0;           // individual comparisons performed
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Brute-force verification of the risk identities and bounds on seeded
/// random enumerable MDPs (up to 4 states, 3 actions, horizon 4):
///   - dropout return = -CVaR(negated returns) = worst-case reweighting,
///     three independently coded routes;
///   - the greedy reweighting is admissible and no random feasible
///     reweighting beats it;
///   - |dropout return - expected return| within the closed-form gap bound;
///   - dropout return nonincreasing in the dropout ratio;
///   - discrepancy-bound monotonicity over a 5^5 parameter grid;
///   - CVaR translation equivariance and positive homogeneity.
/// trials = 0 yields vacuous passes (cases = 0).
std::vector<CheckResult> run_identity_checks(int trials, double tolerance, std::uint64_t seed);

}  // namespace mbdp::risk
