#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "spsn/bench.hpp"
#include "spsn/training.hpp"

namespace spsn {
namespace {

struct Problem {
  RunConfig config;
  EventDataset train;
  EventDataset test;
};

Problem small_problem(NeuronKind kind, std::uint64_t seed = 1) {
  Problem p;
  auto& c = p.config;
  c.seed = seed;
  c.precision = Precision::F64;
  c.network.neuron_kind = kind;
  c.network.hidden_layers = 1;
  c.network.hidden_size = 32;
  c.batch_size = 16;
  c.augment_enabled = false;
  c.epochs = 3;
  c.synth.samples_per_class = 20;
  c.synth.steps = 60;
  std::tie(p.train, p.test) = synthetic_splits(c);
  return p;
}

AdamaxState<double> scalar_state(Tensor<double>& theta) {
  const std::vector<const Tensor<double>*> params{&theta};
  return AdamaxState<double>::for_parameters(params, OptimizerConfig{});
}

TEST(Adamax, ZeroGradientLeavesParametersUnchanged) {
  Tensor<double> theta({3}, std::vector<double>{0.5, -1.0, 2.0});
  const auto before = theta;
  auto state = scalar_state(theta);
  const std::vector<Tensor<double>*> params{&theta};
  const std::vector<Tensor<double>> grads{Tensor<double>({3})};
  for (int i = 0; i < 5; ++i) ASSERT_TRUE(adamax_step<double>(params, grads, state));
  EXPECT_EQ(theta, before);
  EXPECT_EQ(state.step, 5u);
}

TEST(Adamax, FirstStepByHand) {
  Tensor<double> theta({1});
  auto state = scalar_state(theta);
  const std::vector<Tensor<double>*> params{&theta};
  const std::vector<Tensor<double>> grads{Tensor<double>({1}, 1.0)};
  ASSERT_TRUE(adamax_step<double>(params, grads, state));
  EXPECT_NEAR(state.m[0][0], 0.1, 1e-15);
  EXPECT_EQ(state.u_inf[0][0], 1.0);
  EXPECT_NEAR(theta[0], -(0.001 / 0.1) * 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(theta[0], -0.001, 1e-9);
}

TEST(Adamax, ConstantGradientMovesMonotonicallyWithBoundedSteps) {
  for (double g : {3.0, -0.02}) {
    Tensor<double> theta({1});
    auto state = scalar_state(theta);
    const std::vector<Tensor<double>*> params{&theta};
    const std::vector<Tensor<double>> grads{Tensor<double>({1}, g)};
    double prev = 0.0;
    for (int t = 1; t <= 200; ++t) {
      ASSERT_TRUE(adamax_step<double>(params, grads, state));
      const double delta = theta[0] - prev;
      EXPECT_LT(delta * g, 0.0);
      EXPECT_LE(std::abs(delta), 0.001 / (1.0 - std::pow(0.9, t)) + 1e-15);
      prev = theta[0];
    }
  }
}

TEST(Adamax, NonFiniteGradientSkipsTheStep) {
  Tensor<double> theta({2}, 1.0);
  auto state = scalar_state(theta);
  const std::vector<Tensor<double>*> params{&theta};
  const std::vector<Tensor<double>> grads{Tensor<double>({2}, std::vector<double>{1.0, NAN})};
  EXPECT_FALSE(adamax_step<double>(params, grads, state));
  EXPECT_EQ(theta[0], 1.0);
  EXPECT_EQ(state.step, 0u);
  EXPECT_EQ(state.m[0][0], 0.0);
}

TEST(Adamax, RejectsBadHyperparameters) {
  OptimizerConfig c;
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = OptimizerConfig{};
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, NoRemainingEpochsGivesEmptyReport) {
  auto p = small_problem(NeuronKind::Lif);
  Rng rng(0);
  p.config.network.input_channels = p.train.channel_count;
  p.config.network.classes = p.train.class_count;
  auto net = build_network<double>(p.config.network, rng);
  auto opt = AdamaxState<double>::for_parameters(std::as_const(net).parameters(), p.config.optimizer);
  const auto cfg = p.config.train_config(60);
  EXPECT_TRUE(train(net, opt, p.train, &p.test, cfg, cfg.epochs).epochs.empty());
}

TEST(Train, SameSeedBitIdenticalCurves) {
  for (auto kind : {NeuronKind::SpsnSb, NeuronKind::Lif}) {
    auto p = small_problem(kind);
    p.config.augment_enabled = true;
    const auto a = run_experiment<double>(p.config, p.train, &p.test);
    const auto b = run_experiment<double>(p.config, p.train, &p.test);
    std::ostringstream sa, sb;
    a.report.write_csv(sa, false);
    b.report.write_csv(sb, false);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.report.epochs.size(), 3u);
    for (std::size_t i = 0; i < a.network.parameters().size(); ++i) {
      EXPECT_EQ(*a.network.parameters()[i], *b.network.parameters()[i]);
    }
  }
}

TEST(Train, EarlyStopCallback) {
  auto p = small_problem(NeuronKind::Lif);
  p.config.epochs = 10;
  std::size_t seen = 0;
  const auto run = run_experiment<double>(p.config, p.train, nullptr, [&](const EpochRow&) {
    return ++seen < 2;
  });
  EXPECT_EQ(run.report.epochs.size(), 2u);
}

TEST(Train, LossDecreasesOnSyntheticTask) {
  auto p = small_problem(NeuronKind::SpsnSb);
  p.config.epochs = 8;
  const auto run = run_experiment<double>(p.config, p.train, &p.test);
  EXPECT_LT(run.report.epochs.back().mean_loss, run.report.epochs.front().mean_loss);
}

TEST(Train, RegularizerLowersSpikeRate) {
  auto p = small_problem(NeuronKind::SpsnSb);
  p.config.epochs = 12;
  const auto base = run_experiment<double>(p.config, p.train, &p.test);
  p.config.reg_enabled = true;
  p.config.theta_reg = 0.02;
  const auto reg = run_experiment<double>(p.config, p.train, &p.test);
  EXPECT_LT(reg.report.epochs.back().spikes_per_ms, base.report.epochs.back().spikes_per_ms);
}

TEST(Train, MismatchedDatasetRejected) {
  auto p = small_problem(NeuronKind::Lif);
  auto run = run_experiment<double>(p.config, p.train, nullptr);
  auto other = p.train;
  other.channel_count = 21;
  EXPECT_THROW(train_epoch(run.network, run.optimizer, other, nullptr, run.config.train_config(60), 0),
               DataError);
}

TEST(Evaluate, UntrainedNetworkIsNearChance) {
  RunConfig c;
  c.synth.classes = 20;
  c.synth.samples_per_class = 20;
  c.synth.steps = 50;
  const auto ds = synth_generate(c.synth, Rng(3));
  c.network.input_channels = ds.channel_count;
  c.network.classes = 20;
  c.network.hidden_layers = 1;
  c.network.hidden_size = 32;
  Rng rng(4);
  const auto net = build_network<double>(c.network, rng);
  const auto res = evaluate(net, ds, 1, c.train_config(50), 5);
  const double sigma = std::sqrt(0.05 * 0.95 / 400.0);
  EXPECT_LT(std::abs(res.accuracy - 0.05), 4 * sigma);
}

TEST(Evaluate, LifIsDeterministic) {
  auto p = small_problem(NeuronKind::Lif);
  const auto run = run_experiment<double>(p.config, p.train, nullptr);
  const auto cfg = run.config.train_config(60);
  const auto a = evaluate(run.network, p.test, 1, cfg, 1);
  const auto b = evaluate(run.network, p.test, 5, cfg, 2);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.mean_logits, b.mean_logits);
}

TEST(Evaluate, TrialAveragingDoesNotHurtTrainedSpsn) {
  auto p = small_problem(NeuronKind::SpsnSb, 2);
  p.config.epochs = 15;
  const auto run = run_experiment<double>(p.config, p.train, nullptr);
  const auto cfg = run.config.train_config(60);
  const auto single = evaluate(run.network, p.test, 1, cfg, 9);
  const auto mean = evaluate(run.network, p.test, 10, cfg, 9);
  EXPECT_GE(mean.accuracy, single.accuracy - 0.01);
}

TEST(Evaluate, SpikeRateMatchesForwardCounts) {
  auto p = small_problem(NeuronKind::Lif);
  const auto run = run_experiment<double>(p.config, p.train, nullptr);
  const auto cfg = run.config.train_config(60);
  const auto res = evaluate(run.network, p.test, 1, cfg, 0);
  std::vector<std::size_t> idx(p.test.samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Tape<double> tape;
  auto fwd = network_forward(tape, run.network, make_batch<double>(p.test, idx, 60, 0.001), Rng(0), false);
  EXPECT_NEAR(res.spikes_per_ms, spikes_per_ms(fwd.spike_counts, 60, 0.001, idx.size()), 1e-9);
}

TEST(TrainReport, CsvColumns) {
  TrainReport r;
  r.epochs.push_back({0, 0.5, 0.25, 1.5, 3.0, 0.1, 0});
  std::ostringstream with, without;
  r.write_csv(with);
  r.write_csv(without, false);
  EXPECT_EQ(with.str(), std::string(TrainReport::csv_header) + "\n0,0.5,0.25,1.5,3,0.10000000000000001,0\n");
  EXPECT_EQ(without.str(), std::string(TrainReport::csv_header) + "\n0,0.5,0.25,1.5,3,,0\n");
  EXPECT_EQ(r.best_test_accuracy(), 0.25);
}

}  // namespace
}  // namespace spsn
