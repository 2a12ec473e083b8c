#include "mbdp/nn/gaussian.hpp"

#include <numbers>
#include <stdexcept>

namespace mbdp::nn {

GaussianSplit split_gaussian(const Matrix& raw) {
  if (raw.rows() % 2 != 0)
    throw std::invalid_argument("split_gaussian: output rows must be even (mu, log_std)");
  const Eigen::Index d = raw.rows() / 2;
  GaussianSplit out;
  out.mu = raw.topRows(d);
  out.log_std = raw.bottomRows(d).array().min(kLogStdMax).max(kLogStdMin).matrix();
  out.sigma = out.log_std.array().exp().matrix();
  return out;
}

double gaussian_nll(const Matrix& raw, const Matrix& target, Matrix* grad_raw) {
  const GaussianSplit g = split_gaussian(raw);
  if (target.rows() != g.mu.rows() || target.cols() != g.mu.cols())
    throw std::invalid_argument("gaussian_nll: target shape mismatch");
  const Eigen::Index d = g.mu.rows();
  const Eigen::Index n = g.mu.cols();
  const Eigen::ArrayXXd z = (target - g.mu).array() / g.sigma.array();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double loss =
      (0.5 * z.square() + g.log_std.array()).sum() / static_cast<double>(n) +
      half_log_2pi * static_cast<double>(d);
  if (grad_raw != nullptr) {
    grad_raw->resize(raw.rows(), n);
    const double inv_n = 1.0 / static_cast<double>(n);
    // d/dmu = (mu - y) / sigma^2, d/dlog_std = 1 - z^2; zero where clamped.
    grad_raw->topRows(d) = (-z / g.sigma.array() * inv_n).matrix();
    const Eigen::ArrayXXd raw_ls = raw.bottomRows(d).array();
    const Eigen::ArrayXXd active =
        ((raw_ls > kLogStdMin) && (raw_ls < kLogStdMax)).cast<double>();
    grad_raw->bottomRows(d) = ((1.0 - z.square()) * active * inv_n).matrix();
  }
  return loss;
}

}  // namespace mbdp::nn
