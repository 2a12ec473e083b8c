#pragma once

#include <string>
#include <vector>

#include "mbdp/rng.hpp"
#include "mbdp/types.hpp"

namespace mbdp::nn {

struct Linear {
  Matrix W;  // (out x in)
  Vector b;  // (out)
};

/// Feed-forward net: affine layers, tanh on hidden activations, identity
/// output. Columns are batch samples throughout. Gradients are computed by a
/// hand-rolled reverse pass over this fixed structure; no general tape.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const std::vector<int>& widths);  // zero-initialized
  /// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp random_init(const std::vector<int>& widths, RngStream& rng);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  std::size_t param_count() const;

  /// Plain inference. Throws on input dimension mismatch.
  Matrix forward(const Matrix& x) const;

  /// Activations kept for the reverse pass. h[0] is the input, h[i] the
  /// output of layer i-1 (post-tanh for hidden layers).
  struct Trace {
    std::vector<Matrix> h;
  };
  /// Forward pass that checks each layer's output is finite (error names the
  /// first offending layer) and records the trace.
  Matrix forward(const Matrix& x, Trace& trace) const;

  /// grad_out = dL/d(output), shape (output_dim x batch). Accumulates
  /// parameter gradients into `grads` (an Mlp of identical shape) and
  /// returns dL/d(input).
  Matrix backward(const Matrix& grad_out, const Trace& trace, Mlp& grads) const;

  /// Flat parameter vector: per layer, W column-major then b.
  Vector flatten() const;
  void unflatten(const Vector& theta);
  void set_zero();

  /// this <- tau * src + (1 - tau) * this, layer by layer.
  void ema_toward(const Mlp& src, double tau);

  std::vector<Linear> layers;

 private:
  std::vector<int> widths_;
};

}  // namespace mbdp::nn
