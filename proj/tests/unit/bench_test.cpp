#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "spsn/bench.hpp"

namespace spsn {
namespace {

RunConfig tiny_run(NeuronKind kind = NeuronKind::SpsnSb) {
  RunConfig c;
  c.seed = 3;
  c.precision = Precision::F64;
  c.network.neuron_kind = kind;
  c.network.hidden_layers = 1;
  c.network.hidden_size = 16;
  c.batch_size = 16;
  c.epochs = 2;
  c.augment_enabled = false;
  c.synth.samples_per_class = 10;
  c.synth.steps = 30;
  return c;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::size_t columns(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

TEST(Median, OddEvenAndSingle) {
  EXPECT_EQ(median({3.0}), 3.0);
  EXPECT_EQ(median({5.0, 1.0, 3.0}), 3.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
}

TEST(SpeedupResult, SlopeOfPowerLaw) {
  SpeedupResult r;
  for (std::size_t T : {100u, 1000u, 10000u}) {
    r.summary.push_back({"lif", T, 1e-6 * T, 0, 0, 0});
    r.summary.push_back({"spsn-sb", T, 1e-4 * std::sqrt(static_cast<double>(T)), 0, 0, 0});
  }
  EXPECT_NEAR(r.loglog_slope("lif"), 1.0, 1e-12);
  EXPECT_NEAR(r.loglog_slope("spsn-sb"), 0.5, 1e-12);
}

TEST(Speedup, SmallRunReportsRatioForEveryLength) {
  SpeedupConfig cfg;
  cfg.steps = {20, 60};
  cfg.reps = 3;
  cfg.batch = 2;
  cfg.width = 8;
  cfg.input_channels = 8;
  cfg.min_measure_seconds = 0.001;
  const auto r = speedup_benchmark(cfg);
  EXPECT_EQ(r.samples.size(), 2u * 2u * 3u);
  ASSERT_EQ(r.summary.size(), 4u);
  for (const auto& s : r.summary) {
    EXPECT_GT(s.median_seconds, 0.0);
    EXPECT_LE(s.min_seconds, s.median_seconds);
    EXPECT_LE(s.median_seconds, s.max_seconds);
    EXPECT_GT(s.ratio, 0.0);
  }
  EXPECT_GT(r.ratio_at(20), 0.0);
  std::ostringstream samples, summary;
  r.write_samples_csv(samples);
  r.write_summary_csv(summary);
  const auto sl = lines(samples.str()), ml = lines(summary.str());
  EXPECT_EQ(sl.front(), SpeedupResult::samples_header);
  EXPECT_EQ(ml.front(), SpeedupResult::summary_header);
  EXPECT_EQ(sl.size(), 13u);
  EXPECT_EQ(ml.size(), 5u);
  for (const auto& l : sl) EXPECT_EQ(columns(l), columns(sl.front()));
  for (const auto& l : ml) EXPECT_EQ(columns(l), columns(ml.front()));
}

TEST(Speedup, RejectsTooFewRepeats) {
  SpeedupConfig cfg;
  cfg.reps = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RegSweep, InactiveHingeMatchesBaseline) {
  const auto r = regularization_sweep({1.0}, tiny_run(), 1);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].theta, "none");
  EXPECT_EQ(r.rows[1].theta, "1");
  EXPECT_EQ(r.rows[0].spikes_per_ms, r.rows[1].spikes_per_ms);
  EXPECT_EQ(r.rows[0].test_accuracy, r.rows[1].test_accuracy);
}

TEST(RegSweep, RepeatsUseConsecutiveSeedsAndCsvIsRectangular) {
  const auto r = regularization_sweep({0.05, 0.2}, tiny_run(), 2);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[0].seed, 3u);
  EXPECT_EQ(r.rows[3].seed, 4u);
  std::ostringstream os;
  r.write_csv(os);
  const auto ls = lines(os.str());
  EXPECT_EQ(ls.front(), RegSweepResult::header);
  EXPECT_EQ(ls.size(), 7u);
  for (const auto& l : ls) EXPECT_EQ(columns(l), columns(ls.front()));
}

TEST(LossMode, CurvesHaveEqualLengthAndModeLabels) {
  const auto r = loss_mode_compare(
      {ReadoutMode::MeanOverTime, ReadoutMode::MaxOverTime, ReadoutMode::LastStep}, tiny_run(), 1);
  ASSERT_EQ(r.rows.size(), 6u);
  std::ostringstream os;
  r.write_csv(os);
  const auto text = os.str();
  for (const char* label : {",mean,", ",max,", ",last,"}) {
    EXPECT_NE(text.find(label), std::string::npos) << label;
  }
  std::map<ReadoutMode, std::size_t> counts;
  for (const auto& row : r.rows) ++counts[row.mode];
  for (const auto& [mode, n] : counts) EXPECT_EQ(n, 2u);
}

TEST(Robustness, DeterministicLifHasZeroSpread) {
  auto c = tiny_run(NeuronKind::Lif);
  const auto [train_set, test_set] = synthetic_splits(c);
  const auto run = run_experiment<double>(c, train_set, nullptr);
  const auto r = robustness_trials(run.network, test_set, 10, run.config.train_config(30), 7);
  EXPECT_EQ(r.samples.size(), test_set.samples.size());
  EXPECT_EQ(r.stable_fraction(), 1.0);
  for (const auto& s : r.samples)
    for (double sd : s.stddev) EXPECT_EQ(sd, 0.0);
}

TEST(Robustness, StochasticTrialsVaryAndCsvHasOneRowPerClass) {
  auto c = tiny_run(NeuronKind::SpsnSb);
  const auto [train_set, test_set] = synthetic_splits(c);
  const auto run = run_experiment<double>(c, train_set, nullptr);
  const auto r = robustness_trials(run.network, test_set, 5, run.config.train_config(30), 7);
  double spread = 0.0;
  for (const auto& s : r.samples)
    for (double sd : s.stddev) spread += sd;
  EXPECT_GT(spread, 0.0);
  std::ostringstream os;
  r.write_csv(os);
  EXPECT_EQ(lines(os.str()).size(), 1 + test_set.samples.size() * 5);
  EXPECT_THROW(robustness_trials(run.network, test_set, 1, run.config.train_config(30), 7),
               ConfigError);
}

TEST(Experiment, StepsAndSplitsFromConfig) {
  auto c = tiny_run();
  const auto [train_set, test_set] = synthetic_splits(c);
  EXPECT_EQ(steps_for_dataset(train_set, 0.001), 30u);
  EXPECT_EQ(steps_for_dataset(train_set, 0.002), 15u);
  EXPECT_EQ(train_set.samples.size(), 40u);
  EXPECT_EQ(test_set.samples.size(), 10u);
  const auto again = synthetic_splits(c);
  EXPECT_EQ(again.first, train_set);
}

TEST(Fingerprint, IsJsonWithExpectedKeys) {
  const auto doc = nlohmann::json::parse(machine_fingerprint_json(Precision::F64, 1));
  for (const char* key : {"cpu_model", "logical_cores", "precision", "threads", "rng_algorithm"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(doc["precision"], "f64");
}

}  // namespace
}  // namespace spsn
