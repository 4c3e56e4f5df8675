#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "spsn/data.hpp"
#include "spsn/network.hpp"
#include "spsn/objective.hpp"

namespace spsn {

struct OptimizerConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

/// Adamax moments: m is the first moment, u_inf the exponentially weighted
/// infinity norm. Shapes mirror the parameters.
template <typename Real>
struct AdamaxState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> u_inf;

  static AdamaxState for_parameters(std::span<const Tensor<Real>* const> params,
                                    const OptimizerConfig& config);
};

/// m <- b1 m + (1 - b1) g; u <- max(b2 u, |g|);
/// p <- p - lr / (1 - b1^t) * m / (u + eps).
/// Returns false, leaving everything untouched, when a gradient is not
/// finite.
template <typename Real>
bool adamax_step(std::span<Tensor<Real>* const> params, std::span<const Tensor<Real>> grads,
                 AdamaxState<Real>& state);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  std::size_t steps = 100;  // time bins per sample
  double dt = 0.001;
  ReadoutMode readout_mode = ReadoutMode::MeanOverTime;
  bool augment_enabled = true;
  AugmentConfig augment;
  RegConfig reg;
  std::size_t eval_trials = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;  // over the epoch's (augmented) training batches
  double test_accuracy = 0.0;
  double mean_loss = 0.0;
  double spikes_per_ms = 0.0;   // on the test split; 0 for non-spiking networks
  double epoch_seconds = 0.0;   // training loop only
  std::size_t skipped_steps = 0;
};

struct TrainReport {
  std::vector<EpochRow> epochs;

  double best_test_accuracy() const;
  /// One row per epoch. `include_timing` false drops the wall-clock column.
  void write_csv(std::ostream& os, bool include_timing = true) const;
  static constexpr const char* csv_header =
      "epoch,train_accuracy,test_accuracy,mean_loss,spikes_per_ms,epoch_seconds,skipped_steps";
};

struct EvalResult {
  double accuracy = 0.0;
  double spikes_per_ms = 0.0;
  std::vector<std::size_t> predictions;
  /// Trial-mean readout reductions, [samples x classes].
  std::vector<double> mean_logits;
};

/// Accuracy from the arg-max of readout reductions. With trials > 1 each
/// sample is predicted from the trial-mean logits; trial k uses noise from
/// Rng(seed).split(k).
template <typename Real>
EvalResult evaluate(const Network<Real>& net, const EventDataset& dataset, std::size_t trials,
                    const TrainConfig& config, std::uint64_t seed);

/// One pass over the shuffled training split: augment, forward, loss,
/// backward, Adamax. Every random draw derives from (config.seed, epoch),
/// so resuming from a checkpoint reproduces an uninterrupted run.
template <typename Real>
EpochRow train_epoch(Network<Real>& net, AdamaxState<Real>& opt, const EventDataset& train,
                     const EventDataset* test, const TrainConfig& config, std::size_t epoch);

/// Runs epochs [first_epoch, config.epochs). The callback sees each row as
/// it is produced and may return false to stop early.
template <typename Real>
TrainReport train(Network<Real>& net, AdamaxState<Real>& opt, const EventDataset& train_set,
                  const EventDataset* test_set, const TrainConfig& config,
                  std::size_t first_epoch = 0,
                  const std::function<bool(const EpochRow&)>& on_epoch = {});

}  // namespace spsn
