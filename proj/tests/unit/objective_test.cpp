#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "spsn/neurons.hpp"
#include "spsn/objective.hpp"

namespace spsn {
namespace {

using testing::gradcheck;
using testing::random_tensor;

using Vs = std::vector<Var<double>>;

/// softmax + negative log-likelihood written directly from the definition.
double nll_oracle(const Tensor<double>& z, const std::vector<std::size_t>& y) {
  const std::size_t B = z.dim(0), C = z.dim(1);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) denom += std::exp(z[b * C + c]);
    total += -std::log(std::exp(z[b * C + y[b]]) / denom);
  }
  return total / static_cast<double>(B);
}

TEST(ReadoutReduce, ThreeModesOnOneLane) {
  Tensor<double> u({3, 1, 1}, std::vector<double>{1, 2, 3});
  for (auto [mode, want] : {std::pair{ReadoutMode::MeanOverTime, 2.0},
                            std::pair{ReadoutMode::MaxOverTime, 3.0},
                            std::pair{ReadoutMode::LastStep, 3.0}}) {
    Tape<double> tape;
    EXPECT_DOUBLE_EQ(readout_reduce(tape.leaf(u), mode).value().item(), want);
  }
}

TEST(ReadoutReduce, ConstantLaneModesAgree) {
  Tensor<double> u({7, 2, 3}, 0.37);
  for (auto mode : {ReadoutMode::MeanOverTime, ReadoutMode::MaxOverTime, ReadoutMode::LastStep}) {
    Tape<double> tape;
    for (double v : readout_reduce(tape.leaf(u), mode).value().storage()) EXPECT_NEAR(v, 0.37, 1e-15);
  }
}

TEST(ReadoutReduce, MeanGradientIsUniform) {
  Tape<double> tape;
  Rng rng(1);
  auto u = tape.leaf(random_tensor<double>(rng, {8, 2, 3}));
  const auto g = backward(tape, op_sum(readout_reduce(u, ReadoutMode::MeanOverTime)));
  for (double v : g.of(u).storage()) EXPECT_EQ(v, 1.0 / 8.0);
}

TEST(ReadoutReduce, MaxRoutesToEarliestArgmax) {
  Tape<double> tape;
  auto u = tape.leaf(Tensor<double>({4, 1, 1}, std::vector<double>{1, 5, 5, 2}));
  const auto g = backward(tape, op_sum(readout_reduce(u, ReadoutMode::MaxOverTime)));
  EXPECT_EQ(g.of(u).to_vector(), (std::vector<double>{0, 1, 0, 0}));
}

TEST(ReadoutReduce, Gradcheck) {
  Rng rng(2);
  for (auto mode : {ReadoutMode::MeanOverTime, ReadoutMode::MaxOverTime, ReadoutMode::LastStep}) {
    const std::vector<std::size_t> y{1, 0};
    const auto r = gradcheck(
        [&](Tape<double>&, const Vs& v) { return cross_entropy(readout_reduce(v[0], mode), y); },
        {random_tensor<double>(rng, {6, 2, 3})});
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(mode);
  }
}

TEST(ReadoutReduce, ModeNamesRoundTrip) {
  for (auto mode : {ReadoutMode::MeanOverTime, ReadoutMode::MaxOverTime, ReadoutMode::LastStep}) {
    EXPECT_EQ(readout_mode_from_string(to_string(mode)), mode);
  }
  EXPECT_THROW(readout_mode_from_string("median"), ConfigError);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  Tape<double> tape;
  const std::vector<std::size_t> y{3};
  EXPECT_NEAR(cross_entropy(tape.leaf(Tensor<double>({1, 20}, 0.25)), y).value().item(),
              std::log(20.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectLogitGivesZeroLoss) {
  Tape<double> tape;
  Tensor<double> z({1, 4});
  z[2] = 800.0;
  const std::vector<std::size_t> y{2};
  EXPECT_NEAR(cross_entropy(tape.leaf(z), y).value().item(), 0.0, 1e-12);
}

TEST(CrossEntropy, MatchesSoftmaxNllOracle) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto z = random_tensor<double>(rng, {4, 5}, -3, 3);
    std::vector<std::size_t> y;
    for (int b = 0; b < 4; ++b) y.push_back(rng.uniform_index(5));
    Tape<double> tape;
    EXPECT_NEAR(cross_entropy(tape.leaf(z), y).value().item(), nll_oracle(z, y), 1e-12);
  }
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHotOverBatch) {
  Rng rng(4);
  const auto z = random_tensor<double>(rng, {3, 4});
  const std::vector<std::size_t> y{0, 3, 1};
  Tape<double> tape;
  auto v = tape.leaf(z);
  const auto g = backward(tape, cross_entropy(v, y));
  for (std::size_t b = 0; b < 3; ++b) {
    double denom = 0;
    for (std::size_t c = 0; c < 4; ++c) denom += std::exp(z[b * 4 + c]);
    for (std::size_t c = 0; c < 4; ++c) {
      const double want = (std::exp(z[b * 4 + c]) / denom - (c == y[b] ? 1.0 : 0.0)) / 3.0;
      EXPECT_NEAR(g.of(v)[b * 4 + c], want, 1e-14);
    }
  }
}

TEST(CrossEntropy, RejectsOutOfRangeTarget) {
  Tape<double> tape;
  const std::vector<std::size_t> y{4};
  EXPECT_THROW(cross_entropy(tape.leaf(Tensor<double>({1, 4})), y), DataError);
}

TEST(CrossEntropy, ThroughReadoutGradcheck) {
  Rng rng(5);
  NeuronParams p;
  p.tau_mem = 0.005;
  const std::vector<std::size_t> y{2, 0};
  const auto r = gradcheck(
      [&](Tape<double>&, const Vs& v) {
        return cross_entropy(
            readout_reduce(readout_forward(v[0], p, 3).potential, ReadoutMode::MeanOverTime), y);
      },
      {random_tensor<double>(rng, {25, 2, 3}, -5, 5)});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Regularizer, ValueExamples) {
  const std::vector<double> zeros{0, 0, 0};
  EXPECT_EQ(spike_regularizer_value(zeros, 0.4), 0.0);
  const std::vector<double> boundary{0.3, 0.5};
  EXPECT_EQ(spike_regularizer_value(boundary, 0.4), 0.0);
  const std::vector<double> hot{0.8, 0.9};
  EXPECT_NEAR(spike_regularizer_value(hot, 0.4), 0.81, 1e-12);
}

TEST(Regularizer, RasterMatchesRateFormula) {
  Rng rng(6);
  const std::size_t T = 50, B = 3;
  const auto s1 = testing::random_spikes<double>(rng, {T, B, 4}, 0.6);
  const auto s2 = testing::random_spikes<double>(rng, {T, B, 2}, 0.3);
  Tape<double> tape;
  const std::vector<Var<double>> layers{tape.leaf(s1), tape.leaf(s2)};
  const double theta = 0.2;
  double want = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> rates;
    for (const auto* s : {&s1, &s2}) {
      for (std::size_t n = 0; n < s->dim(2); ++n) {
        double c = 0;
        for (std::size_t t = 0; t < T; ++t) c += s->at(t, b, n);
        rates.push_back(c / T);
      }
    }
    want += spike_regularizer_value(rates, theta);
  }
  want /= B;
  EXPECT_NEAR(spike_regularizer(std::span<const Var<double>>(layers), theta).value().item(), want, 1e-12);
}

TEST(Regularizer, Gradcheck) {
  Rng rng(7);
  const auto r = gradcheck(
      [](Tape<double>&, const Vs& v) {
        return spike_regularizer(std::span<const Var<double>>(v), 0.1);
      },
      {random_tensor<double>(rng, {10, 2, 3}, 0.0, 1.0), random_tensor<double>(rng, {10, 2, 2}, 0.0, 1.0)});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Regularizer, InactiveHingeHasZeroGradient) {
  Tape<double> tape;
  auto s = tape.leaf(Tensor<double>({10, 1, 4}, 0.1));
  const auto g = backward(tape, spike_regularizer(std::span<const Var<double>>(&s, 1), 0.5));
  for (double v : g.of(s).storage()) EXPECT_EQ(v, 0.0);
}

TEST(RegConfig, Validation) {
  RegConfig c;
  EXPECT_NO_THROW(c.validate());
  c.theta_reg = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace spsn
