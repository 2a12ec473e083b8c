#pragma once

#include <cmath>

#include "mbdp/types.hpp"

namespace mbdp::nn {

// Hard clamp bounds for predicted log standard deviations: sigma is kept in
// [1e-3, 10] so likelihoods can neither collapse nor explode.
inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 10.0;
inline const double kLogStdMin = std::log(kSigmaMin);
inline const double kLogStdMax = std::log(kSigmaMax);

/// View of a (2d x n) net output as a diagonal Gaussian head: rows [0, d) are
/// the mean, rows [d, 2d) the raw log-std, clamped on read.
struct GaussianSplit {
  Matrix mu;       // (d x n)
  Matrix log_std;  // (d x n), clamped
  Matrix sigma;    // exp(log_std)
};

GaussianSplit split_gaussian(const Matrix& raw);

/// Mean over the batch of the negative log density of `target` under
/// N(mu, diag(sigma^2)), summed over dimensions. When grad_raw is non-null it
/// receives dNLL/d(raw); clamped log-std coordinates get zero gradient.
double gaussian_nll(const Matrix& raw, const Matrix& target, Matrix* grad_raw = nullptr);

}  // namespace mbdp::nn
