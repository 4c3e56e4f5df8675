#include "spsn/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>
#include <utility>

#include "json.hpp"
#include "spsn/numerics.hpp"

namespace spsn {

namespace {

constexpr std::uint64_t kDataStream = 0x64617461;  // "data"
constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"
constexpr std::uint64_t kInitStream = 0x696e6974;  // "init"
constexpr std::uint64_t kBenchStream = 0x62656e6368;  // "bench"

using Clock = std::chrono::steady_clock;

std::string shortest(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

class CsvPrecision {
public:
  explicit CsvPrecision(std::ostream& os) : os_(os), flags_(os.flags()), prec_(os.precision()) {
    os_ << std::setprecision(17);
  }
  ~CsvPrecision() {
    os_.flags(flags_);
    os_.precision(prec_);
  }
  CsvPrecision(const CsvPrecision&) = delete;
  CsvPrecision& operator=(const CsvPrecision&) = delete;

private:
  std::ostream& os_;
  std::ios::fmtflags flags_;
  std::streamsize prec_;
};

template <typename Real>
void one_layer_step(NeuronKind kind, const Tensor<Real>& input, const DenseParams<Real>& layer,
                    const NeuronParams& neuron, const Rng& noise) {
  Tape<Real> tape;
  auto x = tape.constant(input);
  auto w = tape.leaf(layer.weight);
  auto b = tape.leaf(layer.bias);
  auto h = op_dense(x, w, b);
  Var<Real> spikes;
  if (kind == NeuronKind::Lif) {
    spikes = lif_forward(h, neuron).spikes;
  } else {
    Rng rng = noise;
    spikes = spsn_forward(h, neuron, FiringOptions{}, rng).spikes;
  }
  const auto grads = backward(tape, op_sum(spikes));
  if (!grads.of(w).all_finite()) throw NumericError("speedup benchmark: non-finite gradient");
}

template <typename Real>
void run_speedup(const SpeedupConfig& cfg, SpeedupResult& result) {
  const Rng root = Rng(cfg.seed).split(kBenchStream);
  NetworkConfig layer_cfg;
  layer_cfg.input_channels = cfg.input_channels;
  layer_cfg.hidden_layers = 1;
  layer_cfg.hidden_size = cfg.width;
  layer_cfg.classes = 2;
  Rng init = root.split(0);
  const auto layer = build_network<Real>(layer_cfg, init).hidden.front();

  const std::pair<NeuronKind, const char*> models[] = {{NeuronKind::Lif, "lif"},
                                                       {NeuronKind::SpsnSb, "spsn-sb"}};
  for (const std::size_t steps : cfg.steps) {
    Rng input_rng = root.split(1).split(steps);
    const Tensor<Real> p({steps, cfg.batch, cfg.input_channels}, static_cast<Real>(cfg.input_rate));
    const auto input = sample_bernoulli(input_rng, p);
    std::vector<double> medians;
    for (const auto& [kind, name] : models) {
      const Rng noise = root.split(2).split(steps);
      // Warm-up, also used to size the inner loop.
      auto start = Clock::now();
      one_layer_step(kind, input, layer, cfg.neuron, noise);
      const double first = std::chrono::duration<double>(Clock::now() - start).count();
      const auto inner = static_cast<std::size_t>(
          std::max(1.0, std::ceil(cfg.min_measure_seconds / std::max(first, 1e-9))));

      std::vector<double> seconds;
      for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        start = Clock::now();
        for (std::size_t it = 0; it < inner; ++it) {
          one_layer_step(kind, input, layer, cfg.neuron, noise);
        }
        const double total = std::chrono::duration<double>(Clock::now() - start).count();
        seconds.push_back(total / static_cast<double>(inner));
        result.samples.push_back({name, steps, rep, inner, seconds.back()});
      }
      SpeedupSummary s;
      s.model = name;
      s.steps = steps;
      s.median_seconds = median(seconds);
      s.min_seconds = *std::min_element(seconds.begin(), seconds.end());
      s.max_seconds = *std::max_element(seconds.begin(), seconds.end());
      result.summary.push_back(s);
      medians.push_back(s.median_seconds);
    }
    const double ratio = medians[0] / medians[1];
    for (auto it = result.summary.end() - 2; it != result.summary.end(); ++it) it->ratio = ratio;
  }
}

template <typename Real>
RegSweepRow regsweep_run(const RunConfig& cfg, const std::string& theta, std::size_t rep) {
  const auto [train, test] = synthetic_splits(cfg);
  const auto run = run_experiment<Real>(cfg, train, &test);
  const auto& last = run.report.epochs.back();
  return {theta, rep, cfg.seed, last.epoch + 1, last.train_accuracy, last.test_accuracy,
          last.spikes_per_ms};
}

template <typename Real>
void lossmode_run(const RunConfig& cfg, ReadoutMode mode, std::size_t rep,
                  LossModeResult& result) {
  const auto [train, test] = synthetic_splits(cfg);
  const auto run = run_experiment<Real>(cfg, train, &test);
  for (const auto& row : run.report.epochs) result.rows.push_back({mode, rep, cfg.seed, row});
}

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        auto value = line.substr(colon + 1);
        value.erase(0, value.find_first_not_of(' '));
        return value;
      }
    }
  }
  return "unknown";
}

}  // namespace

std::size_t steps_for_dataset(const EventDataset& dataset, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  std::uint64_t longest = 0;
  for (const auto& s : dataset.samples) longest = std::max(longest, s.duration_us);
  const double bins = std::ceil(static_cast<double>(longest) * 1e-6 / dt - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(bins));
}

std::pair<EventDataset, EventDataset> synthetic_splits(const RunConfig& config) {
  const Rng root(config.seed);
  const auto all = synth_generate(config.synth, root.split(kDataStream));
  return stratified_split(all, config.train_fraction, root.split(kSplitStream));
}

template <typename Real>
ExperimentRun<Real> run_experiment(const RunConfig& config, const EventDataset& train_set,
                                   const EventDataset* test_set,
                                   const std::function<bool(const EpochRow&)>& on_epoch) {
  ExperimentRun<Real> run;
  run.config = config;
  auto& cfg = run.config;
  cfg.network.input_channels = train_set.channel_count;
  cfg.network.classes = train_set.class_count;
  if (test_set && (test_set->channel_count != train_set.channel_count ||
                   test_set->class_count != train_set.class_count)) {
    throw DataError(DataErrorKind::ShapeMismatch, "train and test splits disagree in shape");
  }
  if (cfg.steps == 0) {
    cfg.steps = steps_for_dataset(train_set, cfg.network.neuron.dt);
    if (test_set) cfg.steps = std::max(cfg.steps, steps_for_dataset(*test_set, cfg.network.neuron.dt));
  }
  cfg.validate();
  set_num_threads(cfg.threads);

  Rng init = Rng(cfg.seed).split(kInitStream);
  run.network = build_network<Real>(cfg.network, init);
  run.optimizer =
      AdamaxState<Real>::for_parameters(std::as_const(run.network).parameters(), cfg.optimizer);
  run.report = train(run.network, run.optimizer, train_set, test_set, cfg.train_config(cfg.steps),
                     0, on_epoch);
  return run;
}

void SpeedupConfig::validate() const {
  if (steps.empty()) throw ConfigError("speedup: at least one sequence length is required");
  for (auto t : steps) {
    if (t < 1) throw ConfigError("speedup: sequence lengths must be >= 1");
  }
  if (reps < 3) throw ConfigError("speedup: reps must be >= 3");
  if (batch < 1 || width < 1 || input_channels < 1) {
    throw ConfigError("speedup: batch, width and input channels must be >= 1");
  }
  if (!(input_rate >= 0.0 && input_rate <= 1.0)) {
    throw ConfigError("speedup: input rate must lie in [0, 1]");
  }
  if (!(min_measure_seconds > 0.0)) throw ConfigError("speedup: minimum measure time must be > 0");
  if (threads < 1) throw ConfigError("speedup: threads must be >= 1");
  neuron.validate();
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError(DataErrorKind::InvariantViolation, "median of nothing");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double SpeedupResult::loglog_slope(const std::string& model) const {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : summary) {
    if (s.model == model) {
      pts.emplace_back(std::log(static_cast<double>(s.steps)), std::log(s.median_seconds));
    }
  }
  if (pts.size() < 2) throw DataError(DataErrorKind::InvariantViolation, "slope needs two points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  return sxy / sxx;
}

double SpeedupResult::ratio_at(std::size_t steps) const {
  for (const auto& s : summary) {
    if (s.steps == steps) return s.ratio;
  }
  throw DataError(DataErrorKind::InvariantViolation,
                  "no speedup measurement at T=" + std::to_string(steps));
}

void SpeedupResult::write_samples_csv(std::ostream& os) const {
  CsvPrecision guard(os);
  os << samples_header << '\n';
  for (const auto& s : samples) {
    os << "speedup," << s.model << ',' << s.steps << ',' << config.batch << ',' << config.width
       << ',' << config.threads << ',' << to_string(config.precision) << ',' << s.repeat << ','
       << s.inner_iterations << ',' << s.seconds << ',' << config.seed << '\n';
  }
}

void SpeedupResult::write_summary_csv(std::ostream& os) const {
  CsvPrecision guard(os);
  os << summary_header << '\n';
  for (const auto& s : summary) {
    os << "speedup," << s.model << ',' << s.steps << ',' << config.batch << ',' << config.width
       << ',' << config.threads << ',' << to_string(config.precision) << ',' << config.reps << ','
       << s.median_seconds << ',' << s.min_seconds << ',' << s.max_seconds << ',' << s.ratio
       << ',' << config.seed << '\n';
  }
}

SpeedupResult speedup_benchmark(const SpeedupConfig& config) {
  config.validate();
  const unsigned previous = num_threads();
  set_num_threads(config.threads);
  SpeedupResult result;
  result.config = config;
  try {
    if (config.precision == Precision::F32) {
      run_speedup<float>(config, result);
    } else {
      run_speedup<double>(config, result);
    }
  } catch (...) {
    set_num_threads(previous);
    throw;
  }
  set_num_threads(previous);
  return result;
}

void RegSweepResult::write_csv(std::ostream& os) const {
  CsvPrecision guard(os);
  os << header << '\n';
  for (const auto& r : rows) {
    os << "regsweep," << neuron << ',' << r.theta << ',' << r.repeat << ',' << r.seed << ','
       << r.epochs << ',' << r.train_accuracy << ',' << r.test_accuracy << ',' << r.spikes_per_ms
       << '\n';
  }
}

RegSweepResult regularization_sweep(const std::vector<double>& thetas, const RunConfig& base,
                                    std::size_t reps) {
  if (reps < 1) throw ConfigError("regsweep: reps must be >= 1");
  if (!is_spiking(base.network.neuron_kind)) {
    throw ConfigError("regsweep: the neuron model must be a spiking one");
  }
  RegSweepResult result;
  result.neuron = std::string(to_string(base.network.neuron_kind));
  for (std::size_t rep = 0; rep < reps; ++rep) {
    RunConfig cfg = base;
    cfg.seed = base.seed + rep;
    std::vector<std::pair<std::string, RunConfig>> runs;
    cfg.reg_enabled = false;
    runs.emplace_back("none", cfg);
    for (double theta : thetas) {
      cfg.reg_enabled = true;
      cfg.theta_reg = theta;
      runs.emplace_back(shortest(theta), cfg);
    }
    for (const auto& [label, run_cfg] : runs) {
      result.rows.push_back(run_cfg.precision == Precision::F32
                                ? regsweep_run<float>(run_cfg, label, rep)
                                : regsweep_run<double>(run_cfg, label, rep));
    }
  }
  return result;
}

void LossModeResult::write_csv(std::ostream& os) const {
  CsvPrecision guard(os);
  os << header << '\n';
  for (const auto& r : rows) {
    os << "lossmode," << neuron << ',' << to_string(r.mode) << ',' << r.repeat << ',' << r.seed
       << ',' << r.epoch.epoch << ',' << r.epoch.train_accuracy << ',' << r.epoch.test_accuracy
       << ',' << r.epoch.mean_loss << ',' << r.epoch.spikes_per_ms << '\n';
  }
}

LossModeResult loss_mode_compare(const std::vector<ReadoutMode>& modes, const RunConfig& base,
                                 std::size_t reps) {
  if (reps < 1) throw ConfigError("lossmode: reps must be >= 1");
  if (modes.empty()) throw ConfigError("lossmode: at least one readout mode is required");
  LossModeResult result;
  result.neuron = std::string(to_string(base.network.neuron_kind));
  for (std::size_t rep = 0; rep < reps; ++rep) {
    for (const auto mode : modes) {
      RunConfig cfg = base;
      cfg.seed = base.seed + rep;
      cfg.readout_mode = mode;
      if (cfg.precision == Precision::F32) {
        lossmode_run<float>(cfg, mode, rep, result);
      } else {
        lossmode_run<double>(cfg, mode, rep, result);
      }
    }
  }
  return result;
}

double RobustnessResult::stable_fraction() const {
  if (samples.empty()) return 0.0;
  const auto stable = std::count_if(samples.begin(), samples.end(),
                                    [](const RobustnessSample& s) { return s.stable; });
  return static_cast<double>(stable) / static_cast<double>(samples.size());
}

void RobustnessResult::write_csv(std::ostream& os) const {
  CsvPrecision guard(os);
  os << header << '\n';
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < s.mean.size(); ++c) {
      os << "robustness," << neuron << ',' << s.index << ',' << s.label << ',' << s.prediction
         << ',' << (s.stable ? 1 : 0) << ',' << c << ',' << s.mean[c] << ',' << s.stddev[c] << ','
         << trials << ',' << seed << '\n';
    }
  }
}

template <typename Real>
RobustnessResult robustness_trials(const Network<Real>& net, const EventDataset& dataset,
                                   std::size_t trials, const TrainConfig& config,
                                   std::uint64_t seed) {
  if (trials < 2) throw ConfigError("robustness: trials must be >= 2");
  const std::size_t n = dataset.samples.size();
  const std::size_t classes = net.config.classes;
  std::vector<EvalResult> runs;
  const Rng root(seed);
  for (std::size_t k = 0; k < trials; ++k) {
    runs.push_back(evaluate(net, dataset, 1, config, root.split(k).next_u64()));
  }

  RobustnessResult result;
  result.neuron = std::string(to_string(net.config.neuron_kind));
  result.trials = trials;
  result.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    RobustnessSample s;
    s.index = i;
    s.label = dataset.samples[i].label;
    s.mean.assign(classes, 0.0);
    s.stddev.assign(classes, 0.0);
    s.stable = true;
    // Moments are taken about the first trial so identical trials give exactly zero spread.
    const auto* first = &runs.front().mean_logits[i * classes];
    std::vector<double> shift(classes, 0.0);
    for (const auto& r : runs) {
      if (r.predictions[i] != runs.front().predictions[i]) s.stable = false;
      for (std::size_t c = 0; c < classes; ++c) shift[c] += r.mean_logits[i * classes + c] - first[c];
    }
    for (auto& m : shift) m /= static_cast<double>(trials);
    for (const auto& r : runs) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double d = r.mean_logits[i * classes + c] - first[c] - shift[c];
        s.stddev[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < classes; ++c) s.mean[c] = first[c] + shift[c];
    for (auto& v : s.stddev) v = std::sqrt(v / static_cast<double>(trials));
    s.prediction =
        static_cast<std::size_t>(std::max_element(s.mean.begin(), s.mean.end()) - s.mean.begin());
    result.samples.push_back(std::move(s));
  }
  return result;
}

std::string machine_fingerprint_json(Precision precision, unsigned threads) {
  nlohmann::json j;
  j["cpu_model"] = cpu_model();
  j["logical_cores"] = std::thread::hardware_concurrency();
  j["precision"] = std::string(to_string(precision));
  j["threads"] = threads;
  j["rng_algorithm"] = std::string(Rng::algorithm);
  return j.dump(2);
}

#define SPSN_INSTANTIATE(Real)                                                                 \
  template ExperimentRun<Real> run_experiment<Real>(const RunConfig&, const EventDataset&,     \
                                                    const EventDataset*,                       \
                                                    const std::function<bool(const EpochRow&)>&); \
  template RobustnessResult robustness_trials<Real>(const Network<Real>&, const EventDataset&, \
                                                    std::size_t, const TrainConfig&,           \
                                                    std::uint64_t);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
