#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "spsn/rng.hpp"
#include "spsn/tensor.hpp"

namespace spsn {

template <typename Real>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as
/// the tape is alive.
template <typename Real>
class Var {
public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<Real>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Tape<Real>* tape() const noexcept { return tape_; }

private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of the requires_grad leaves after a backward pass.
template <typename Real>
class Gradients {
public:
  const Tensor<Real>& of(const Var<Real>& v) const;
  bool contains(const Var<Real>& v) const;

private:
  template <typename R>
  friend Gradients<R> backward(Tape<R>& tape, const Var<R>& loss);

  std::vector<std::optional<Tensor<Real>>> grads_;
};

/// Append-only record of one forward pass. Nodes are stored in creation
/// order, which is a topological order because inputs must already exist.
/// One tape per forward pass; discard it after backward.
template <typename Real>
class Tape {
public:
  /// Called once during backward with the accumulated output gradient.
  /// Implementations add into tape.grad_slot(input) for their inputs.
  using BackwardFn = std::function<void(const Tensor<Real>& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> leaf(Tensor<Real> value, bool requires_grad = true);
  Var<Real> constant(Tensor<Real> value) { return leaf(std::move(value), false); }

  Var<Real> record(Tensor<Real> value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Node values keep a stable address for the lifetime of the tape.
  const Tensor<Real>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient accumulator for a node, zero-initialised on first use.
  Tensor<Real>& grad_slot(std::size_t id);

private:
  template <typename R>
  friend Gradients<R> backward(Tape<R>& tape, const Var<R>& loss);

  struct Node {
    Tensor<Real> value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool leaf = false;
  };

  std::deque<Node> nodes_;
  std::vector<std::optional<Tensor<Real>>> grads_;
};

/// Reverse pass from a scalar loss. Every node is visited at most once in
/// reverse creation order; fan-out gradients are summed.
template <typename Real>
Gradients<Real> backward(Tape<Real>& tape, const Var<Real>& loss);

// ---------------------------------------------------------------------------
// Differentiable operations

/// y = x W + b over the last axis of x. x may have any rank >= 1.
template <typename Real>
Var<Real> op_dense(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias);

template <typename Real>
Var<Real> op_relu(const Var<Real>& x);

template <typename Real>
Var<Real> op_add(const Var<Real>& a, const Var<Real>& b);

template <typename Real>
Var<Real> op_scale(const Var<Real>& a, double factor);

template <typename Real>
Var<Real> op_sum(const Var<Real>& x);

/// Causal convolution along the time axis of a [T x B x N] value, evaluated
/// with the padded FFT. Backward is the matching correlation.
template <typename Real>
Var<Real> op_causal_conv(const Var<Real>& x, std::span<const Real> kernel);

/// Fast-sigmoid surrogate derivative 1 / (1 + slope * |delta|)^2.
double surrogate_factor(double delta, double slope);

/// Forward: 1 where u >= threshold, else 0. Backward: incoming gradient times
/// surrogate_factor(u - threshold, slope).
template <typename Real>
Var<Real> op_heaviside_surrogate(const Var<Real>& u, double threshold, double slope);

double sigmoid(double x);

/// Forward: rho = sigmoid(u - offset), s ~ Bernoulli(rho). Backward:
/// incoming * rho * rho * (1 - rho), the probability-as-gradient rule
/// chained through the sigmoid.
template <typename Real>
Var<Real> op_sigmoid_bernoulli(const Var<Real>& u, Rng& rng, double offset = 0.0);

/// Logistic noise g1 - g2 with g1, g2 standard Gumbel, the only noise the
/// binary-concrete relaxation needs.
template <typename Real>
Tensor<Real> sample_logistic_noise(Rng& rng, const Shape& shape);

/// Relaxed binary-concrete sample sigmoid((u + noise) / temperature) with its
/// exact gradient, for a fixed noise tensor.
template <typename Real>
Var<Real> op_gumbel_relaxed(const Var<Real>& u, double temperature, const Tensor<Real>& noise);

/// Hard spike 1[relaxed >= 0.5]; backward uses the relaxed sample's gradient
/// (straight-through).
template <typename Real>
Var<Real> op_gumbel_spike(const Var<Real>& u, double temperature, const Tensor<Real>& noise);

template <typename Real>
Var<Real> op_gumbel_spike(const Var<Real>& u, double temperature, Rng& rng);

}  // namespace spsn
