#pragma once

#include <stdexcept>

#include "mbdp/types.hpp"

namespace mbdp::nn {

/// Adaptive moment estimation over a flat parameter vector. Deterministic
/// given its state; a non-finite gradient raises and leaves params untouched.
class Adam {
 public:
  Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Vector::Zero(n)), v_(Vector::Zero(n)) {
    if (!(lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
  }

  void step(Vector& params, const Vector& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("Adam::step: size mismatch");
    if (!grads.allFinite()) throw std::runtime_error("Adam::step: non-finite gradient");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grads.array().square().matrix();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  double lr() const { return lr_; }
  long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Vector m_, v_;
  long t_ = 0;
};

}  // namespace mbdp::nn
