#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mbdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// ceil(x) with the result snapped to the nearest integer when x sits within
/// 1e-9 of it. Retention counts like ceil((1 - ratio) * n) must equal their
/// exact rational value even when the product picks up float noise.
inline long ceil_count(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) < 1e-9) return static_cast<long>(r);
  return static_cast<long>(std::ceil(x));
}

/// One environment or model sample. The atom stored in both replay buffers.
struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool terminal = false;

  /// Throws std::invalid_argument on non-finite fields or mismatched
  /// state/next_state dimensions.
  void check() const {
    if (!state.allFinite()) throw std::invalid_argument("Transition: non-finite state");
    if (!action.allFinite()) throw std::invalid_argument("Transition: non-finite action");
    if (!std::isfinite(reward)) throw std::invalid_argument("Transition: non-finite reward");
    if (!next_state.allFinite()) throw std::invalid_argument("Transition: non-finite next_state");
    if (state.size() != next_state.size())
      throw std::invalid_argument("Transition: state and next_state dimensions differ");
  }
};

/// Dropout ratios plus the discount and reward bound the closed-form bounds
/// are evaluated with.
struct DropoutConfig {
  double alpha = 0.2;       // rollout-dropout fraction, in [0, 1)
  double beta = 0.2;        // model-dropout fraction, in [0, 1)
  double gamma = 0.99;      // discount, in (0, 1)
  double reward_sup = 1.0;  // R with |r(s, a)| <= R for the environment in use

  void validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0))
      throw std::invalid_argument("DropoutConfig: alpha must be in [0, 1)");
    if (!(beta >= 0.0 && beta < 1.0))
      throw std::invalid_argument("DropoutConfig: beta must be in [0, 1)");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("DropoutConfig: gamma must be in (0, 1)");
    if (!(reward_sup > 0.0) || !std::isfinite(reward_sup))
      throw std::invalid_argument("DropoutConfig: reward_sup must be positive and finite");
  }
};

}  // namespace mbdp
