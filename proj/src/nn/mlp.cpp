#include "mbdp/nn/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace mbdp::nn {

Mlp::Mlp(const std::vector<int>& widths) : widths_(widths) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("Mlp: widths must be positive");
  layers.reserve(widths.size() - 1);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers.push_back({Matrix::Zero(widths[i + 1], widths[i]), Vector::Zero(widths[i + 1])});
}

Mlp Mlp::random_init(const std::vector<int>& widths, RngStream& rng) {
  Mlp net(widths);
  for (auto& layer : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.W.cols()));
    for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i) layer.W(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = rng.uniform(-bound, bound);
  }
  return net;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size()) + static_cast<std::size_t>(l.b.size());
  return n;
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.rows() != input_dim())
    throw std::invalid_argument("Mlp::forward: input dim " + std::to_string(x.rows()) +
                                " != expected " + std::to_string(input_dim()));
  Matrix h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = (layers[i].W * h).colwise() + layers[i].b;
    if (i + 1 < layers.size()) h = h.array().tanh().matrix();
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, Trace& trace) const {
  if (x.rows() != input_dim())
    throw std::invalid_argument("Mlp::forward: input dim " + std::to_string(x.rows()) +
                                " != expected " + std::to_string(input_dim()));
  trace.h.clear();
  trace.h.reserve(layers.size() + 1);
  trace.h.push_back(x);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix h = (layers[i].W * trace.h.back()).colwise() + layers[i].b;
    if (i + 1 < layers.size()) h = h.array().tanh().matrix();
    if (!h.allFinite())
      throw std::runtime_error("Mlp::forward: non-finite activations after layer " + std::to_string(i));
    trace.h.push_back(std::move(h));
  }
  return trace.h.back();
}

Matrix Mlp::backward(const Matrix& grad_out, const Trace& trace, Mlp& grads) const {
  if (trace.h.size() != layers.size() + 1)
    throw std::invalid_argument("Mlp::backward: trace does not match this net");
  if (grads.layers.size() != layers.size())
    throw std::invalid_argument("Mlp::backward: grads shape mismatch");
  Matrix d = grad_out;
  for (std::size_t idx = layers.size(); idx-- > 0;) {
    if (idx + 1 < layers.size()) {
      // h[idx + 1] = tanh(z); d(tanh)/dz = 1 - tanh^2.
      d = (d.array() * (1.0 - trace.h[idx + 1].array().square())).matrix();
    }
    grads.layers[idx].W.noalias() += d * trace.h[idx].transpose();
    grads.layers[idx].b.noalias() += d.rowwise().sum();
    d = layers[idx].W.transpose() * d;
  }
  return d;  // dL/d(input)
}

Vector Mlp::flatten() const {
  Vector theta(param_count());
  Eigen::Index off = 0;
  for (const auto& l : layers) {
    theta.segment(off, l.W.size()) = Eigen::Map<const Vector>(l.W.data(), l.W.size());
    off += l.W.size();
    theta.segment(off, l.b.size()) = l.b;
    off += l.b.size();
  }
  return theta;
}

void Mlp::unflatten(const Vector& theta) {
  if (theta.size() != static_cast<Eigen::Index>(param_count()))
    throw std::invalid_argument("Mlp::unflatten: parameter count mismatch");
  Eigen::Index off = 0;
  for (auto& l : layers) {
    Eigen::Map<Vector>(l.W.data(), l.W.size()) = theta.segment(off, l.W.size());
    off += l.W.size();
    l.b = theta.segment(off, l.b.size());
    off += l.b.size();
  }
}

void Mlp::set_zero() {
  for (auto& l : layers) {
    l.W.setZero();
    l.b.setZero();
  }
}

void Mlp::ema_toward(const Mlp& src, double tau) {
  if (src.layers.size() != layers.size())
    throw std::invalid_argument("Mlp::ema_toward: shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].W = tau * src.layers[i].W + (1.0 - tau) * layers[i].W;
    layers[i].b = tau * src.layers[i].b + (1.0 - tau) * layers[i].b;
  }
}

}  // namespace mbdp::nn
