#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spsn/rng.hpp"
#include "spsn/tensor.hpp"

namespace spsn {

/// Impulse response h[t] = gain * decay^t for t in [0, length), stored
/// lowest power first. With gain 1 this is the current kernel; with gain
/// (1 - beta) it is the membrane kernel.
template <typename Real>
struct DecayKernel {
  double decay = 0.0;
  double gain = 1.0;
  std::vector<Real> values;

  std::size_t length() const noexcept { return values.size(); }
};

template <typename Real>
DecayKernel<Real> build_decay_kernel(double decay, double gain, std::size_t length);

/// y[t] = sum_{j<=t} kernel[j] * x[t-j] along axis 0 of a [T x B x N] tensor,
/// independently for every (b, n) lane. Linear (zero-padded) convolution
/// truncated to T, so there is no circular wrap-around.
template <typename Real>
Tensor<Real> causal_fft_convolve(std::span<const Real> kernel, const Tensor<Real>& x);

template <typename Real>
Tensor<Real> causal_fft_convolve(const DecayKernel<Real>& kernel, const Tensor<Real>& x) {
  return causal_fft_convolve<Real>(std::span<const Real>(kernel.values), x);
}

/// Adjoint of causal_fft_convolve: y[t] = sum_{j} kernel[j] * g[t+j], t+j < T.
template <typename Real>
Tensor<Real> causal_fft_correlate(std::span<const Real> kernel, const Tensor<Real>& g);

/// (a * b)[t] for t < T, the impulse response of applying a then b.
template <typename Real>
std::vector<Real> compose_kernels(std::span<const Real> a, std::span<const Real> b);

/// Padded FFT length used for a sequence of T steps: the smallest power of
/// two >= 2T - 1.
std::size_t fft_length(std::size_t steps);

template <typename Real>
Tensor<Real> sample_bernoulli(Rng& rng, const Tensor<Real>& p);

/// Standard Gumbel(0, 1) draws, -log(-log(U)) with U clamped inside (0, 1).
template <typename Real>
Tensor<Real> sample_gumbel(Rng& rng, const Shape& shape);

/// Worker threads used by the batched FFT. Results do not depend on it.
void set_num_threads(unsigned n);
unsigned num_threads();

}  // namespace spsn
