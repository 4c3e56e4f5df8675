#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "spsn/data.hpp"
#include "spsn/network.hpp"
#include "spsn/run_config.hpp"
#include "spsn/training.hpp"

namespace spsn {

// ---------------------------------------------------------------------------
// Experiment plumbing shared by the CLI, the bench harnesses and the tests.

/// Bins needed to cover the longest sample: ceil(duration / dt), at least 1.
std::size_t steps_for_dataset(const EventDataset& dataset, double dt);

/// Generates the synthetic task from config.synth and splits it
/// stratified by config.train_fraction. Both draws derive from config.seed.
std::pair<EventDataset, EventDataset> synthetic_splits(const RunConfig& config);

template <typename Real>
struct ExperimentRun {
  RunConfig config;  // with network dimensions and steps resolved
  Network<Real> network;
  AdamaxState<Real> optimizer;
  TrainReport report;
};

/// Builds a network sized for `train`, then trains it under `config`.
template <typename Real>
ExperimentRun<Real> run_experiment(const RunConfig& config, const EventDataset& train,
                                   const EventDataset* test,
                                   const std::function<bool(const EpochRow&)>& on_epoch = {});

// ---------------------------------------------------------------------------
// Speedup: one dense layer into LIF or SPSN-SB, forward + backward of the
// summed spikes, timed per sequence length.

struct SpeedupConfig {
  std::vector<std::size_t> steps = {100, 316, 1000, 3162, 10000};
  std::size_t reps = 10;
  std::size_t batch = 64;
  std::size_t width = 128;
  std::size_t input_channels = 128;
  double input_rate = 0.1;
  double min_measure_seconds = 0.01;
  unsigned threads = 1;
  Precision precision = Precision::F32;
  std::uint64_t seed = 0;
  NeuronParams neuron;

  void validate() const;
};

struct SpeedupSample {
  std::string model;  // "lif" or "spsn-sb"
  std::size_t steps = 0;
  std::size_t repeat = 0;
  std::size_t inner_iterations = 0;
  double seconds = 0.0;  // per forward+backward
};

struct SpeedupSummary {
  std::string model;
  std::size_t steps = 0;
  double median_seconds = 0.0;
  double min_seconds = 0.0;
  double max_seconds = 0.0;
  double ratio = 0.0;  // median LIF / median SPSN at the same length
};

struct SpeedupResult {
  SpeedupConfig config;
  std::vector<SpeedupSample> samples;
  std::vector<SpeedupSummary> summary;

  /// Least-squares slope of log(median seconds) against log(steps).
  double loglog_slope(const std::string& model) const;
  double ratio_at(std::size_t steps) const;

  void write_samples_csv(std::ostream& os) const;
  void write_summary_csv(std::ostream& os) const;
  static constexpr const char* samples_header =
      "experiment,model,steps,batch,width,threads,precision,repeat,inner_iterations,seconds,seed";
  static constexpr const char* summary_header =
      "experiment,model,steps,batch,width,threads,precision,reps,median_seconds,min_seconds,"
      "max_seconds,ratio_lif_over_spsn,seed";
};

SpeedupResult speedup_benchmark(const SpeedupConfig& config);

/// Median of a non-empty sample.
double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Regularization sweep: final-epoch spikes/ms and accuracy per theta_reg.

struct RegSweepRow {
  std::string theta;  // "none" for the unregularized baseline
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double spikes_per_ms = 0.0;
};

struct RegSweepResult {
  std::vector<RegSweepRow> rows;
  void write_csv(std::ostream& os) const;
  static constexpr const char* header =
      "experiment,neuron,theta_reg,repeat,seed,epochs,train_accuracy,test_accuracy,spikes_per_ms";
  std::string neuron;
};

/// One baseline run without the penalty plus one run per theta, for each
/// repeat; repeat r trains with seed base.seed + r.
RegSweepResult regularization_sweep(const std::vector<double>& thetas, const RunConfig& base,
                                    std::size_t reps);

// ---------------------------------------------------------------------------
// Readout-mode comparison: per-epoch curves for each reduction.

struct LossModeRow {
  ReadoutMode mode = ReadoutMode::MeanOverTime;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  EpochRow epoch;
};

struct LossModeResult {
  std::string neuron;
  std::vector<LossModeRow> rows;
  void write_csv(std::ostream& os) const;
  static constexpr const char* header =
      "experiment,neuron,mode,repeat,seed,epoch,train_accuracy,test_accuracy,mean_loss,"
      "spikes_per_ms";
};

LossModeResult loss_mode_compare(const std::vector<ReadoutMode>& modes, const RunConfig& base,
                                 std::size_t reps);

// ---------------------------------------------------------------------------
// Robustness: the same input passed through a trained network n times.

struct RobustnessSample {
  std::size_t index = 0;
  std::size_t label = 0;
  std::size_t prediction = 0;  // arg-max of the trial-mean logits
  bool stable = false;         // every trial shares the same arg-max
  std::vector<double> mean;    // per class
  std::vector<double> stddev;  // population std over trials, per class
};

struct RobustnessResult {
  std::string neuron;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<RobustnessSample> samples;

  double stable_fraction() const;
  void write_csv(std::ostream& os) const;
  static constexpr const char* header =
      "experiment,neuron,sample,label,prediction,stable,class,mean_logit,std_logit,trials,seed";
};

template <typename Real>
RobustnessResult robustness_trials(const Network<Real>& net, const EventDataset& dataset,
                                   std::size_t trials, const TrainConfig& config,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------

/// CPU model, logical core count and library settings, as a JSON object.
std::string machine_fingerprint_json(Precision precision, unsigned threads);

}  // namespace spsn
