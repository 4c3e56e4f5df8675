#pragma once

#include <optional>
#include <vector>

#include "spsn/autodiff.hpp"
#include "spsn/rng.hpp"
#include "spsn/tensor.hpp"

namespace spsn {

/// Time constants and threshold of the current-based leaky neuron. The
/// decay factors are always derived from the time constants. Input
/// resistance is fixed to 1 and the reset potential to 0.
struct NeuronParams {
  double tau_syn = 0.02;  // s
  double tau_mem = 0.02;  // s
  double dt = 0.001;      // s
  double u_th = 1.0;      // V

  double alpha() const;
  double beta() const;
  void validate() const;

  bool operator==(const NeuronParams&) const = default;
};

/// Synaptic current and membrane potential, both [T x B x N].
template <typename Real>
struct MembraneTrace {
  Var<Real> current;
  Var<Real> potential;
};

template <typename Real>
struct SpikingOutput {
  Var<Real> spikes;
  MembraneTrace<Real> trace;
};

/// Sequential LIF with reset by multiplication:
///   i[n] = alpha i[n-1] + x[n]
///   u[n] = (beta u[n-1] + (1 - beta) i[n]) (1 - s[n-1])
///   s[n] = 1[u[n] >= u_th]
/// Backward runs BPTT with the fast-sigmoid surrogate; the reset gate is
/// treated as a constant. The returned trace is not differentiable.
template <typename Real>
SpikingOutput<Real> lif_forward(const Var<Real>& x, const NeuronParams& params,
                                double surrogate_slope = 10.0);

/// Leaky integrator evaluated step by step (no reset). The potential is
/// differentiable; the current is recorded as a constant.
template <typename Real>
MembraneTrace<Real> li_forward_sequential(const Var<Real>& x, const NeuronParams& params);

/// Leaky integrator evaluated as two causal FFT convolutions,
/// i = l * x and u = k * i, with l[t] = alpha^t and k[t] = (1 - beta) beta^t.
template <typename Real>
MembraneTrace<Real> li_forward_parallel(const Var<Real>& x, const NeuronParams& params);

/// Combined impulse response (k * l)[t] = (1 - beta) sum_j beta^j alpha^(t-j).
std::vector<double> membrane_kernel(const NeuronParams& params, std::size_t length);

/// Potential only, as one causal FFT convolution with membrane_kernel.
template <typename Real>
Var<Real> li_potential_parallel(const Var<Real>& x, const NeuronParams& params);

enum class FiringKind { SigmoidBernoulli, GumbelSoftmax, Escape };

/// rho(u) = exp((u - b) / c) / a. When b is unset it defaults to u_th.
struct EscapeParams {
  double a = 1.0;
  std::optional<double> b;
  double c = 0.2;
};

struct FiringOptions {
  FiringKind kind = FiringKind::SigmoidBernoulli;
  /// Sigmoid-Bernoulli fires on sigmoid(u - u_offset); 0 uses u directly.
  double u_offset = 0.0;
  double temperature = 1.0;
  EscapeParams escape;
};

/// Parallel leaky integration followed by an independent stochastic firing
/// decision at every time step. Only the potential is materialised;
/// trace.current is left empty.
template <typename Real>
SpikingOutput<Real> spsn_forward(const Var<Real>& x, const NeuronParams& params,
                                 const FiringOptions& firing, Rng& rng);

/// Instantaneous firing intensity exp((u - b) / c) / a.
double escape_intensity(double u, double a, double b, double c);

/// Per-step spike probability min(1, intensity * dt).
template <typename Real>
Tensor<Real> escape_rate(const Tensor<Real>& u, double a, double b, double c, double dt);

/// Bernoulli firing on escape_rate probabilities. Backward mirrors the
/// sigmoid-Bernoulli rule: incoming * p * dp/du.
template <typename Real>
Var<Real> op_escape_spike(const Var<Real>& u, double a, double b, double c, double dt, Rng& rng);

/// Non-spiking readout layer: the parallel leaky integrator over class lanes.
template <typename Real>
MembraneTrace<Real> readout_forward(const Var<Real>& x, const NeuronParams& params,
                                    std::size_t classes);

}  // namespace spsn
