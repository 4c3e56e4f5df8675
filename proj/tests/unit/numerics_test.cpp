#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "spsn/numerics.hpp"

namespace spsn {
namespace {

using testing::direct_convolve;
using testing::random_tensor;
using testing::scaled_error;
using testing::to_double;

TEST(DecayKernel, DeltaKernel) {
  const auto k = build_decay_kernel<double>(0.0, 1.0, 3);
  EXPECT_EQ(k.values, (std::vector<double>{1, 0, 0}));
}

TEST(DecayKernel, GainTimesPower) {
  const auto k = build_decay_kernel<double>(0.5, 0.5, 3);
  ASSERT_EQ(k.length(), 3u);
  EXPECT_DOUBLE_EQ(k.values[0], 0.5);
  EXPECT_DOUBLE_EQ(k.values[1], 0.25);
  EXPECT_DOUBLE_EQ(k.values[2], 0.125);
}

TEST(DecayKernel, SynapticDecayFromTimeConstant) {
  const double alpha = std::exp(-0.001 / 0.02);
  const auto k = build_decay_kernel<double>(alpha, 1.0, 2);
  EXPECT_DOUBLE_EQ(k.values[0], 1.0);
  EXPECT_NEAR(k.values[1], 0.951229424500714, 1e-15);
}

TEST(DecayKernel, MatchesClosedFormForEveryIndex) {
  for (double decay : {0.1, 0.9, 0.999}) {
    const auto k = build_decay_kernel<double>(decay, 0.3, 500);
    for (std::size_t t = 0; t < k.length(); ++t) {
      EXPECT_NEAR(k.values[t], 0.3 * std::pow(decay, static_cast<double>(t)), 1e-13);
    }
  }
}

TEST(DecayKernel, RejectsOutOfRangeDecay) {
  EXPECT_THROW(build_decay_kernel<double>(1.0, 1.0, 3), NumericError);
  EXPECT_THROW(build_decay_kernel<double>(-0.1, 1.0, 3), NumericError);
}

TEST(FftLength, SmallestPowerOfTwoCoveringLinearConvolution) {
  EXPECT_EQ(fft_length(1), 2u);
  EXPECT_EQ(fft_length(2), 4u);
  EXPECT_EQ(fft_length(3), 8u);
  EXPECT_EQ(fft_length(257), 1024u);
  EXPECT_EQ(fft_length(4096), 8192u);
  for (std::size_t T = 1; T < 3000; T += 37) {
    const auto n = fft_length(T);
    EXPECT_GE(n, 2 * T - 1);
    EXPECT_EQ(n & (n - 1), 0u);
    if (T > 1) EXPECT_LT(n / 2, 2 * T - 1);
  }
}

TEST(CausalConvolve, IdentityKernel) {
  const std::vector<double> k{1, 0, 0};
  Tensor<double> x({3, 1, 1}, std::vector<double>{3, 5, 7});
  const auto y = causal_fft_convolve<double>(k, x);
  EXPECT_NEAR(y[0], 3, 1e-12);
  EXPECT_NEAR(y[1], 5, 1e-12);
  EXPECT_NEAR(y[2], 7, 1e-12);
}

TEST(CausalConvolve, ImpulseReturnsKernel) {
  const std::vector<double> k{1, 0.5, 0.25};
  Tensor<double> x({3, 1, 1}, std::vector<double>{1, 0, 0});
  const auto y = causal_fft_convolve<double>(k, x);
  EXPECT_NEAR(y[0], 1, 1e-12);
  EXPECT_NEAR(y[1], 0.5, 1e-12);
  EXPECT_NEAR(y[2], 0.25, 1e-12);
}

TEST(CausalConvolve, MatchesDirectSumSinglePrecision) {
  Rng rng(11);
  const auto x = random_tensor<float>(rng, {257, 3, 5});
  const auto k = build_decay_kernel<float>(0.9, 1.0, 257);
  const auto y = causal_fft_convolve(k, x);
  const std::vector<double> kd(k.values.begin(), k.values.end());
  EXPECT_LT(scaled_error(y, direct_convolve(kd, to_double(x))), 1e-5);
}

TEST(CausalConvolve, PropertyMatchesDirectSumForRandomLengths) {
  Rng rng(2024);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t T = 1 + rng.uniform_index(512);
    const std::size_t B = 1 + rng.uniform_index(3);
    const std::size_t N = 1 + rng.uniform_index(20);
    const auto x = random_tensor<double>(rng, {T, B, N});
    std::vector<double> k(T);
    for (auto& v : k) v = rng.uniform(-1, 1);
    const auto y = causal_fft_convolve<double>(k, x);
    EXPECT_LT(scaled_error(y, direct_convolve(k, x)), 1e-12) << "T=" << T;
  }
}

TEST(CausalConvolve, NoWrapAroundFromLateInputs) {
  const std::size_t T = 64;
  Tensor<double> x({T, 1, 1});
  x[T - 1] = 1.0;
  const std::vector<double> k(T, 1.0);
  const auto y = causal_fft_convolve<double>(k, x);
  for (std::size_t t = 0; t + 1 < T; ++t) EXPECT_NEAR(y[t], 0.0, 1e-12);
  EXPECT_NEAR(y[T - 1], 1.0, 1e-12);
}

TEST(CausalConvolve, ShortSupportKernel) {
  Rng rng(5);
  const auto x = random_tensor<double>(rng, {50, 2, 3});
  std::vector<double> k(50, 0.0);
  k[0] = 0.5, k[1] = -1.0, k[2] = 2.0;
  EXPECT_LT(scaled_error(causal_fft_convolve<double>(k, x), direct_convolve(k, x)), 1e-12);
}

TEST(CausalConvolve, RejectsKernelLengthMismatch) {
  const std::vector<double> k{0.5, -1.0, 2.0};
  EXPECT_THROW(causal_fft_convolve<double>(k, Tensor<double>({50, 1, 1})), DataError);
}

TEST(CausalConvolve, IndependentOfThreadCount) {
  Rng rng(9);
  const auto x = random_tensor<float>(rng, {300, 4, 37});
  const auto k = build_decay_kernel<float>(0.95, 1.0, 300);
  set_num_threads(1);
  const auto one = causal_fft_convolve(k, x);
  set_num_threads(3);
  const auto three = causal_fft_convolve(k, x);
  set_num_threads(1);
  EXPECT_EQ(one, three);
}

TEST(CausalConvolve, RejectsNonRank3) {
  const std::vector<double> k{1.0};
  EXPECT_THROW(causal_fft_convolve<double>(k, Tensor<double>({4, 2})), DataError);
}

TEST(CausalCorrelate, IsTheAdjointOfConvolve) {
  Rng rng(77);
  for (std::size_t T : {1u, 7u, 100u, 333u}) {
    const auto x = random_tensor<double>(rng, {T, 2, 3});
    const auto g = random_tensor<double>(rng, {T, 2, 3});
    std::vector<double> k(T);
    for (auto& v : k) v = rng.uniform(-1, 1);
    const auto y = causal_fft_convolve<double>(k, x);
    const auto r = causal_fft_correlate<double>(k, g);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lhs += y[i] * g[i];
      rhs += x[i] * r[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(lhs)));
  }
}

TEST(ComposeKernels, ApplyingInSequenceEqualsComposedKernel) {
  Rng rng(3);
  const std::size_t T = 200;
  const auto a = build_decay_kernel<double>(0.9, 1.0, T);
  const auto b = build_decay_kernel<double>(0.8, 0.2, T);
  const auto c = compose_kernels<double>(a.values, b.values);
  ASSERT_EQ(c.size(), T);
  const auto x = random_tensor<double>(rng, {T, 1, 4});
  const auto twice = causal_fft_convolve(b, causal_fft_convolve(a, x));
  EXPECT_LT(scaled_error(causal_fft_convolve<double>(c, x), twice), 1e-12);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, KnownFirstOutputs) {
  // splitmix64 reference values for state 0 advanced by the golden gamma.
  EXPECT_EQ(splitmix64(0x9e3779b97f4a7c15ULL), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(0x3c6ef372fe94f82aULL), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(1);
  Rng b(1);
  (void)a.split(5);
  EXPECT_EQ(a.counter(), 0u);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SplitStreamsDiffer) {
  const Rng root(1);
  auto s0 = root.split(0), s1 = root.split(1);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += s0.next_u64() == s1.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, UniformRanges) {
  Rng rng(8);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double o = rng.uniform_open();
    ASSERT_GT(o, 0.0);
    ASSERT_LT(o, 1.0);
    ASSERT_LT(rng.uniform_index(7), 7u);
  }
}

TEST(Rng, UniformIndexIsUnbiased) {
  Rng rng(12);
  const std::size_t n = 6, draws = 120000;
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < draws; ++i) counts[rng.uniform_index(n)] += 1;
  const double expect = static_cast<double>(draws) / n;
  const double sigma = std::sqrt(draws * (1.0 / n) * (1.0 - 1.0 / n));
  for (double c : counts) EXPECT_LT(std::abs(c - expect), 4 * sigma);
}

TEST(SampleBernoulli, DegenerateProbabilities) {
  Rng rng(1);
  Tensor<double> zeros({1000}, 0.0), ones({1000}, 1.0);
  EXPECT_EQ(sample_bernoulli(rng, zeros).sum(), 0.0);
  EXPECT_EQ(sample_bernoulli(rng, ones).sum(), 1000.0);
}

TEST(SampleBernoulli, MeanWithinBinomialBound) {
  Rng rng(2);
  Tensor<double> p({100000}, 0.3);
  const double mean = sample_bernoulli(rng, p).sum() / 100000.0;
  EXPECT_GE(mean, 0.294);
  EXPECT_LE(mean, 0.306);
}

TEST(SampleBernoulli, OutputsAreBinary) {
  Rng rng(3);
  auto p = random_tensor<float>(rng, {500}, 0.0, 1.0);
  const auto s = sample_bernoulli(rng, p);
  for (float v : s.storage()) EXPECT_TRUE(v == 0.0f || v == 1.0f);
}

TEST(SampleGumbel, FiniteAndMeanIsEulerMascheroni) {
  Rng rng(4);
  const auto g = sample_gumbel<double>(rng, {100000});
  EXPECT_TRUE(g.all_finite());
  EXPECT_NEAR(g.sum() / 100000.0, 0.5772156649, 0.02);
}

TEST(SampleGumbel, Deterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(sample_gumbel<float>(a, {64}), sample_gumbel<float>(b, {64}));
}

}  // namespace
}  // namespace spsn
