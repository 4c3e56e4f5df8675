#include "spsn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace spsn {

namespace {

// Stream identifiers for Rng::split; fixed so runs are reproducible.
constexpr std::uint64_t kTrainStream = 0x747261696e;  // "train"
constexpr std::uint64_t kEvalStream = 0x6576616c;     // "eval"

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (eval_trials < 1) throw ConfigError("eval_trials must be >= 1");
  augment.validate();
  reg.validate();
}

template <typename Real>
AdamaxState<Real> AdamaxState<Real>::for_parameters(std::span<const Tensor<Real>* const> params,
                                                    const OptimizerConfig& config) {
  config.validate();
  AdamaxState state;
  state.config = config;
  for (const auto* p : params) {
    state.m.emplace_back(p->shape());
    state.u_inf.emplace_back(p->shape());
  }
  return state;
}

template <typename Real>
bool adamax_step(std::span<Tensor<Real>* const> params, std::span<const Tensor<Real>> grads,
                 AdamaxState<Real>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DataError(DataErrorKind::ShapeMismatch, "adamax: parameter/gradient count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(grads[k].shape(), params[k]->shape(), "adamax gradient");
    require_shape(state.m[k].shape(), params[k]->shape(), "adamax state");
    if (!grads[k].all_finite()) return false;
  }
  const auto& cfg = state.config;
  ++state.step;
  const double step_size =
      cfg.lr / (1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.m[k];
    auto& u = state.u_inf[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double ui = std::max(cfg.beta2 * u[i], std::abs(gi));
      m[i] = static_cast<Real>(mi);
      u[i] = static_cast<Real>(ui);
      p[i] = static_cast<Real>(p[i] - step_size * mi / (ui + cfg.eps));
    }
  }
  return true;
}

double TrainReport::best_test_accuracy() const {
  double best = 0.0;
  for (const auto& row : epochs) best = std::max(best, row.test_accuracy);
  return best;
}

void TrainReport::write_csv(std::ostream& os, bool include_timing) const {
  os << csv_header << '\n';
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(17);
  for (const auto& r : epochs) {
    os << r.epoch << ',' << r.train_accuracy << ',' << r.test_accuracy << ',' << r.mean_loss
       << ',' << r.spikes_per_ms << ',';
    if (include_timing) os << r.epoch_seconds;
    os << ',' << r.skipped_steps << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

template <typename Real>
EvalResult evaluate(const Network<Real>& net, const EventDataset& dataset, std::size_t trials,
                    const TrainConfig& config, std::uint64_t seed) {
  if (dataset.samples.empty()) {
    throw DataError(DataErrorKind::InvariantViolation, "evaluate: empty dataset");
  }
  if (trials < 1) throw ConfigError("evaluate: trials must be >= 1");
  const std::size_t n = dataset.samples.size();
  const std::size_t classes = net.config.classes;
  const std::size_t effective_trials = is_stochastic(net.config.neuron_kind) ? trials : 1;

  EvalResult result;
  result.mean_logits.assign(n * classes, 0.0);
  double total_spikes = 0.0;
  const Rng base(seed);
  for (std::size_t trial = 0; trial < effective_trials; ++trial) {
    const Rng trial_rng = base.split(trial);
    for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
      std::vector<std::size_t> idx(std::min(config.batch_size, n - start));
      std::iota(idx.begin(), idx.end(), start);
      const auto x = make_batch<Real>(dataset, idx, config.steps, config.dt);
      Tape<Real> tape;
      const auto fwd = network_forward(tape, net, x, trial_rng.split(batch), false);
      const auto logits = readout_reduce(fwd.readout_potential, config.readout_mode);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        for (std::size_t c = 0; c < classes; ++c) {
          result.mean_logits[(start + b) * classes + c] += logits.value()[b * classes + c];
        }
      }
      for (double s : fwd.spike_counts) total_spikes += s;
    }
  }

  std::size_t correct = 0;
  result.predictions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = std::span<double>(result.mean_logits).subspan(i * classes, classes);
    for (auto& v : row) v /= static_cast<double>(effective_trials);
    result.predictions[i] = argmax_row(row);
    if (result.predictions[i] == dataset.samples[i].label) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  result.spikes_per_ms = spikes_per_ms(total_spikes / static_cast<double>(effective_trials),
                                       config.steps, config.dt, n);
  return result;
}

template <typename Real>
EpochRow train_epoch(Network<Real>& net, AdamaxState<Real>& opt, const EventDataset& train,
                     const EventDataset* test, const TrainConfig& config, std::size_t epoch) {
  config.validate();
  if (train.samples.empty()) {
    throw DataError(DataErrorKind::InvariantViolation, "train_epoch: empty training set");
  }
  if (train.channel_count != net.config.input_channels ||
      train.class_count > net.config.classes) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "train_epoch: dataset does not match the network dimensions");
  }
  const Rng epoch_rng = Rng(config.seed).split(kTrainStream).split(epoch);
  const std::size_t n = train.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = epoch_rng.split(0);
  shuffle_indices(order, shuffle_rng);

  const bool spiking = is_spiking(net.config.neuron_kind);
  const bool regularize = config.reg.enabled && spiking;
  auto params = net.parameters();

  EpochRow row;
  row.epoch = epoch;
  double loss_sum = 0.0;
  double train_spikes = 0.0;
  std::size_t correct = 0;
  std::size_t batches = 0;

  const auto started = std::chrono::steady_clock::now();
  for (std::size_t start = 0, k = 0; start < n; start += config.batch_size, ++k) {
    const std::size_t count = std::min(config.batch_size, n - start);
    const std::span<const std::size_t> idx(order.data() + start, count);
    const Rng augment_rng = epoch_rng.split(1).split(k);
    const auto x = make_batch<Real>(train, idx, config.steps, config.dt,
                                    config.augment_enabled ? &config.augment : nullptr,
                                    &augment_rng);
    std::vector<std::size_t> targets(count);
    for (std::size_t b = 0; b < count; ++b) targets[b] = train.samples[idx[b]].label;

    Tape<Real> tape;
    const auto fwd = network_forward(tape, net, x, epoch_rng.split(2).split(k));
    const auto logits = readout_reduce(fwd.readout_potential, config.readout_mode);
    auto loss = cross_entropy(logits, targets);
    if (regularize) {
      auto reg = spike_regularizer<Real>(fwd.hidden_spikes, config.reg.theta_reg);
      loss = op_add(loss, op_scale(reg, config.reg.weight));
    }
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(k));
    }
    const auto grads = backward(tape, loss);
    std::vector<Tensor<Real>> param_grads;
    param_grads.reserve(fwd.parameter_vars.size());
    for (const auto& v : fwd.parameter_vars) param_grads.push_back(grads.of(v));
    if (!adamax_step<Real>(params, param_grads, opt)) ++row.skipped_steps;

    loss_sum += loss_value * static_cast<double>(count);
    for (double s : fwd.spike_counts) train_spikes += s;
    const std::size_t classes = net.config.classes;
    for (std::size_t b = 0; b < count; ++b) {
      const auto* r = logits.value().data().data() + b * classes;
      const auto pred = static_cast<std::size_t>(std::max_element(r, r + classes) - r);
      if (pred == targets[b]) ++correct;
    }
    ++batches;
  }
  row.epoch_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  row.mean_loss = loss_sum / static_cast<double>(n);
  row.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);

  if (test) {
    const auto eval_seed = Rng(config.seed).split(kEvalStream).split(epoch).next_u64();
    const auto result = evaluate(net, *test, config.eval_trials, config, eval_seed);
    row.test_accuracy = result.accuracy;
    row.spikes_per_ms = spiking ? result.spikes_per_ms : 0.0;
  } else if (spiking) {
    row.spikes_per_ms = spikes_per_ms(train_spikes, config.steps, config.dt, n);
  }
  return row;
}

template <typename Real>
TrainReport train(Network<Real>& net, AdamaxState<Real>& opt, const EventDataset& train_set,
                  const EventDataset* test_set, const TrainConfig& config,
                  std::size_t first_epoch, const std::function<bool(const EpochRow&)>& on_epoch) {
  TrainReport report;
  for (std::size_t epoch = first_epoch; epoch < config.epochs; ++epoch) {
    report.epochs.push_back(train_epoch(net, opt, train_set, test_set, config, epoch));
    if (on_epoch && !on_epoch(report.epochs.back())) break;
  }
  return report;
}

#define SPSN_INSTANTIATE(Real)                                                               \
  template struct AdamaxState<Real>;                                                       \
  template bool adamax_step<Real>(std::span<Tensor<Real>* const>,                          \
                                  std::span<const Tensor<Real>>, AdamaxState<Real>&);      \
  template EvalResult evaluate<Real>(const Network<Real>&, const EventDataset&, std::size_t, \
                                     const TrainConfig&, std::uint64_t);                   \
  template EpochRow train_epoch<Real>(Network<Real>&, AdamaxState<Real>&,                  \
                                      const EventDataset&, const EventDataset*,            \
                                      const TrainConfig&, std::size_t);                    \
  template TrainReport train<Real>(Network<Real>&, AdamaxState<Real>&, const EventDataset&, \
                                   const EventDataset*, const TrainConfig&, std::size_t,   \
                                   const std::function<bool(const EpochRow&)>&);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
