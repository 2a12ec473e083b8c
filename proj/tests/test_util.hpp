#pragma once

#include <functional>

#include "mbdp/nn/mlp.hpp"
#include "mbdp/replay_buffer.hpp"
#include "mbdp/rng.hpp"
#include "mbdp/types.hpp"

namespace mbdp::testutil {

/// Central finite differences over every parameter of `net` against the
/// analytic gradient produced by `loss_and_grad(net, &grads)`. Relative
/// error is tracked only where at least one side clears `min_grad`.
struct FdReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

inline FdReport fd_check(const nn::Mlp& net,
                         const std::function<double(const nn::Mlp&, nn::Mlp*)>& loss_and_grad,
                         double h = 1e-5, double min_grad = 1e-6) {
  nn::Mlp grads(net.widths());
  loss_and_grad(net, &grads);
  const Vector analytic = grads.flatten();
  Vector theta = net.flatten();
  FdReport report;
  nn::Mlp probe = net;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta(i);
    theta(i) = saved + h;
    probe.unflatten(theta);
    const double up = loss_and_grad(probe, nullptr);
    theta(i) = saved - h;
    probe.unflatten(theta);
    const double down = loss_and_grad(probe, nullptr);
    theta(i) = saved;
    const double fd = (up - down) / (2.0 * h);
    const double mag = std::max(std::abs(fd), std::abs(analytic(i)));
    if (mag < min_grad) continue;
    report.max_rel_err = std::max(report.max_rel_err, std::abs(fd - analytic(i)) / mag);
    ++report.checked;
  }
  probe.unflatten(theta);
  return report;
}

/// Deterministic linear system s' = A s + B a + c with bounded random
/// coefficients; the known ground truth the ensemble tests fit against.
struct LinearSystem {
  Matrix A, B;
  Vector c;

  static LinearSystem random(int ds, int da, RngStream& rng) {
    LinearSystem sys;
    sys.A = 0.8 * Matrix::Identity(ds, ds) + 0.1 * rng.normal_matrix(ds, ds);
    sys.B = 0.3 * rng.normal_matrix(ds, da);
    sys.c = 0.1 * rng.normal_vector(ds);
    return sys;
  }

  Transition sample(RngStream& rng) const {
    Transition t;
    t.state = rng.uniform_vector(A.rows(), -1.0, 1.0);
    t.action = rng.uniform_vector(B.cols(), -1.0, 1.0);
    t.next_state = A * t.state + B * t.action + c;
    t.reward = 0.0;
    t.terminal = false;
    return t;
  }

  void fill(ReplayBuffer& buf, int n, std::uint64_t seed) const {
    RngStream rng(seed);
    for (int i = 0; i < n; ++i) buf.push(sample(rng));
  }
};

inline Transition make_transition(std::initializer_list<double> s, std::initializer_list<double> a,
                                  double r, std::initializer_list<double> ns,
                                  bool terminal = false) {
  Transition t;
  t.state = Eigen::Map<const Vector>(std::data(s), static_cast<Eigen::Index>(s.size()));
  t.action = Eigen::Map<const Vector>(std::data(a), static_cast<Eigen::Index>(a.size()));
  t.reward = r;
  t.next_state = Eigen::Map<const Vector>(std::data(ns), static_cast<Eigen::Index>(ns.size()));
  t.terminal = terminal;
  return t;
}

}  // namespace mbdp::testutil
