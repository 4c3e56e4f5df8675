#include "spsn/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>

namespace spsn {

namespace {

// Lanes are transformed in fixed-width groups; partial groups are zero
// padded so every lane always goes through the same FFTW plan.
constexpr int kLaneBlock = 16;
constexpr std::size_t kMaxFftLength = std::size_t{1} << 30;

std::atomic<unsigned> g_threads{1};

template <typename Real>
struct Fftw;

template <>
struct Fftw<double> {
  using Complex = fftw_complex;
  using Plan = fftw_plan;
  static void* malloc(std::size_t n) { return fftw_malloc(n); }
  static void free(void* p) { fftw_free(p); }
  static Plan plan_r2c(int n, int howmany, double* in, Complex* out) {
    return fftw_plan_many_dft_r2c(1, &n, howmany, in, nullptr, 1, n, out, nullptr, 1,
                                  n / 2 + 1, FFTW_ESTIMATE);
  }
  static Plan plan_c2r(int n, int howmany, Complex* in, double* out) {
    return fftw_plan_many_dft_c2r(1, &n, howmany, in, nullptr, 1, n / 2 + 1, out, nullptr,
                                  1, n, FFTW_ESTIMATE);
  }
  static void r2c(Plan p, double* in, Complex* out) { fftw_execute_dft_r2c(p, in, out); }
  static void c2r(Plan p, Complex* in, double* out) { fftw_execute_dft_c2r(p, in, out); }
  static void destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct Fftw<float> {
  using Complex = fftwf_complex;
  using Plan = fftwf_plan;
  static void* malloc(std::size_t n) { return fftwf_malloc(n); }
  static void free(void* p) { fftwf_free(p); }
  static Plan plan_r2c(int n, int howmany, float* in, Complex* out) {
    return fftwf_plan_many_dft_r2c(1, &n, howmany, in, nullptr, 1, n, out, nullptr, 1,
                                   n / 2 + 1, FFTW_ESTIMATE);
  }
  static Plan plan_c2r(int n, int howmany, Complex* in, float* out) {
    return fftwf_plan_many_dft_c2r(1, &n, howmany, in, nullptr, 1, n / 2 + 1, out, nullptr,
                                   1, n, FFTW_ESTIMATE);
  }
  static void r2c(Plan p, float* in, Complex* out) { fftwf_execute_dft_r2c(p, in, out); }
  static void c2r(Plan p, Complex* in, float* out) { fftwf_execute_dft_c2r(p, in, out); }
  static void destroy(Plan p) { fftwf_destroy_plan(p); }
};

template <typename Real>
struct FftwFree {
  void operator()(void* p) const { Fftw<Real>::free(p); }
};

template <typename T, typename Real>
using FftwBuffer = std::unique_ptr<T[], FftwFree<Real>>;

template <typename T, typename Real>
FftwBuffer<T, Real> fftw_buffer(std::size_t count) {
  auto* p = static_cast<T*>(Fftw<Real>::malloc(sizeof(T) * std::max<std::size_t>(count, 1)));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T, Real>(p);
}

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex g_plan_mutex;

template <typename Real>
struct PlanPair {
  typename Fftw<Real>::Plan forward;
  typename Fftw<Real>::Plan inverse;
};

template <typename Real>
class PlanCache {
public:
  ~PlanCache() {
    for (auto& [key, plans] : plans_) {
      Fftw<Real>::destroy(plans.forward);
      Fftw<Real>::destroy(plans.inverse);
    }
  }

  PlanPair<Real> get(int n, int howmany) {
    std::lock_guard lock(g_plan_mutex);
    auto key = std::make_pair(n, howmany);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t bins = static_cast<std::size_t>(n / 2 + 1);
    auto real = fftw_buffer<Real, Real>(static_cast<std::size_t>(n) * howmany);
    auto spec = fftw_buffer<typename Fftw<Real>::Complex, Real>(bins * howmany);
    PlanPair<Real> plans{Fftw<Real>::plan_r2c(n, howmany, real.get(), spec.get()),
                         Fftw<Real>::plan_c2r(n, howmany, spec.get(), real.get())};
    plans_.emplace(key, plans);
    return plans;
  }

private:
  std::map<std::pair<int, int>, PlanPair<Real>> plans_;
};

template <typename Real>
PlanCache<Real>& plan_cache() {
  static PlanCache<Real> cache;
  return cache;
}

template <typename Real>
std::vector<std::complex<double>> kernel_spectrum(std::span<const Real> kernel, std::size_t n) {
  auto plans = plan_cache<Real>().get(static_cast<int>(n), 1);
  auto real = fftw_buffer<Real, Real>(n);
  auto spec = fftw_buffer<typename Fftw<Real>::Complex, Real>(n / 2 + 1);
  std::fill(real.get(), real.get() + n, Real{0});
  std::copy(kernel.begin(), kernel.end(), real.get());
  Fftw<Real>::r2c(plans.forward, real.get(), spec.get());
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {static_cast<double>(spec[k][0]), static_cast<double>(spec[k][1])};
  }
  return out;
}

// Shared body of convolution (reverse == false) and correlation
// (reverse == true, computed as reverse(conv(kernel, reverse(g)))).
template <typename Real>
Tensor<Real> fft_filter(std::span<const Real> kernel, const Tensor<Real>& x, bool reverse) {
  if (x.rank() != 3) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "causal convolution expects a [T x B x N] tensor, got " +
                        shape_string(x.shape()));
  }
  const std::size_t steps = x.dim(0);
  if (kernel.size() != steps) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "kernel length " + std::to_string(kernel.size()) +
                        " does not match sequence length " + std::to_string(steps));
  }
  Tensor<Real> y(x.shape());
  const std::size_t lanes = x.dim(1) * x.dim(2);
  if (steps == 0 || lanes == 0) return y;

  const std::size_t n = fft_length(steps);
  const std::size_t bins = n / 2 + 1;
  const auto spectrum = kernel_spectrum<Real>(kernel, n);
  const auto plans = plan_cache<Real>().get(static_cast<int>(n), kLaneBlock);
  const std::size_t blocks = (lanes + kLaneBlock - 1) / kLaneBlock;
  const Real inv_n = Real{1} / static_cast<Real>(n);

  const auto* src = x.data().data();
  auto* dst = y.data().data();

  auto work = [&](std::size_t first_block, std::size_t last_block) {
    auto real = fftw_buffer<Real, Real>(n * kLaneBlock);
    auto spec = fftw_buffer<typename Fftw<Real>::Complex, Real>(bins * kLaneBlock);
    for (std::size_t blk = first_block; blk < last_block; ++blk) {
      const std::size_t lane0 = blk * kLaneBlock;
      const std::size_t width = std::min<std::size_t>(kLaneBlock, lanes - lane0);
      std::fill(real.get(), real.get() + n * kLaneBlock, Real{0});
      for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t ts = reverse ? steps - 1 - t : t;
        const Real* row = src + ts * lanes + lane0;
        for (std::size_t j = 0; j < width; ++j) real[j * n + t] = row[j];
      }
      Fftw<Real>::r2c(plans.forward, real.get(), spec.get());
      for (std::size_t j = 0; j < static_cast<std::size_t>(kLaneBlock); ++j) {
        auto* s = spec.get() + j * bins;
        for (std::size_t k = 0; k < bins; ++k) {
          const double re = s[k][0];
          const double im = s[k][1];
          const auto& h = spectrum[k];
          s[k][0] = static_cast<Real>(re * h.real() - im * h.imag());
          s[k][1] = static_cast<Real>(re * h.imag() + im * h.real());
        }
      }
      Fftw<Real>::c2r(plans.inverse, spec.get(), real.get());
      for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t ts = reverse ? steps - 1 - t : t;
        Real* row = dst + ts * lanes + lane0;
        for (std::size_t j = 0; j < width; ++j) row[j] = real[j * n + t] * inv_n;
      }
    }
  };

  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, num_threads()), blocks));
  if (threads <= 1) {
    work(0, blocks);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t per = (blocks + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t first = w * per;
      const std::size_t last = std::min(blocks, first + per);
      if (first < last) pool.emplace_back(work, first, last);
    }
  }
  return y;
}

}  // namespace

std::size_t fft_length(std::size_t steps) {
  const std::size_t needed = steps == 0 ? 1 : 2 * steps - 1;
  if (steps > kMaxFftLength / 2) {
    throw NumericError("FFT size overflow for sequence length " + std::to_string(steps));
  }
  std::size_t n = 2;
  while (n < needed) n <<= 1;
  return n;
}

template <typename Real>
DecayKernel<Real> build_decay_kernel(double decay, double gain, std::size_t length) {
  if (!std::isfinite(decay) || !std::isfinite(gain)) {
    throw NumericError("decay kernel parameters must be finite");
  }
  if (decay < 0.0 || decay >= 1.0) {
    throw NumericError("decay must lie in [0, 1), got " + std::to_string(decay));
  }
  if (length == 0) {
    throw DataError(DataErrorKind::ShapeMismatch, "decay kernel length must be >= 1");
  }
  DecayKernel<Real> k{decay, gain, std::vector<Real>(length)};
  // Repeated multiplication drifts; pow keeps each entry within one rounding.
  for (std::size_t t = 0; t < length; ++t) {
    k.values[t] = static_cast<Real>(gain * std::pow(decay, static_cast<double>(t)));
  }
  return k;
}

template <typename Real>
Tensor<Real> causal_fft_convolve(std::span<const Real> kernel, const Tensor<Real>& x) {
  return fft_filter<Real>(kernel, x, false);
}

template <typename Real>
Tensor<Real> causal_fft_correlate(std::span<const Real> kernel, const Tensor<Real>& g) {
  return fft_filter<Real>(kernel, g, true);
}

template <typename Real>
std::vector<Real> compose_kernels(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) {
    throw DataError(DataErrorKind::ShapeMismatch, "kernels must have equal length");
  }
  Tensor<Real> lane(Shape{b.size(), 1, 1}, std::vector<Real>(b.begin(), b.end()));
  return causal_fft_convolve<Real>(a, lane).to_vector();
}

template <typename Real>
Tensor<Real> sample_bernoulli(Rng& rng, const Tensor<Real>& p) {
  Tensor<Real> s(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Real pi = p[i];
    if (!(pi >= Real{0} && pi <= Real{1})) {
      throw NumericError("Bernoulli probability outside [0, 1]");
    }
    s[i] = rng.uniform() < static_cast<double>(pi) ? Real{1} : Real{0};
  }
  return s;
}

template <typename Real>
Tensor<Real> sample_gumbel(Rng& rng, const Shape& shape) {
  constexpr double eps = 1e-12;
  Tensor<Real> g(shape);
  for (auto& v : g.storage()) {
    const double u = std::clamp(rng.uniform_open(), eps, 1.0 - eps);
    v = static_cast<Real>(-std::log(-std::log(u)));
  }
  return g;
}

void set_num_threads(unsigned n) { g_threads.store(std::max(1u, n)); }
unsigned num_threads() { return g_threads.load(); }

#define SPSN_INSTANTIATE(Real)                                                              \
  template DecayKernel<Real> build_decay_kernel<Real>(double, double, std::size_t);       \
  template Tensor<Real> causal_fft_convolve<Real>(std::span<const Real>,                  \
                                                  const Tensor<Real>&);                   \
  template Tensor<Real> causal_fft_correlate<Real>(std::span<const Real>,                 \
                                                   const Tensor<Real>&);                  \
  template std::vector<Real> compose_kernels<Real>(std::span<const Real>,                 \
                                                   std::span<const Real>);                \
  template Tensor<Real> sample_bernoulli<Real>(Rng&, const Tensor<Real>&);                \
  template Tensor<Real> sample_gumbel<Real>(Rng&, const Shape&);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
