#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "spsn/bench.hpp"
#include "spsn/checkpoint.hpp"
#include "spsn/data.hpp"
#include "spsn/numerics.hpp"
#include "spsn/training.hpp"

namespace spsn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text(path, ss.str());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void log_epoch(const EpochRow& row, std::size_t epochs) {
  std::fprintf(stderr,
               "epoch %zu/%zu  loss %.4f  train %.3f  test %.3f  spikes/ms %.3f  %.2fs\n",
               row.epoch + 1, epochs, row.mean_loss, row.train_accuracy, row.test_accuracy,
               row.spikes_per_ms, row.epoch_seconds);
}

json epoch_json(const EpochRow& row) {
  return {{"epoch", row.epoch},
          {"train_accuracy", row.train_accuracy},
          {"test_accuracy", row.test_accuracy},
          {"mean_loss", row.mean_loss},
          {"spikes_per_ms", row.spikes_per_ms}};
}

template <typename Real>
void train_impl(const RunConfig& config, const TrainOptions& options) {
  auto train_set = load_dataset(options.data, Split::Train);
  EventDataset test_set;
  if (options.test_data) {
    test_set = load_dataset(*options.test_data, Split::Test);
  } else {
    auto [tr, te] = stratified_split(train_set, config.train_fraction,
                                     Rng(config.seed).split(kSplitStream));
    train_set = std::move(tr);
    test_set = std::move(te);
  }
  const fs::path out_dir = config.output_dir;
  const fs::path report_path = out_dir / "report.csv";
  const fs::path ckpt_path = out_dir / "checkpoint.spck";
  const fs::path summary_path = out_dir / "summary.json";
  const fs::path config_path = out_dir / "config.json";
  ensure_dir(out_dir);
  for (const auto& p : {report_path, ckpt_path, summary_path, config_path}) {
    claim_output(p, options.force);
  }

  Checkpoint<Real> ckpt;
  TrainReport report;
  std::size_t first_epoch = 0;
  const auto on_epoch = [&](const EpochRow& row) {
    if (!options.quiet) log_epoch(row, ckpt.config.epochs);
    return true;
  };
  if (options.resume) {
    ckpt = load_checkpoint<Real>(*options.resume);
    first_epoch = ckpt.epochs_completed;
    ckpt.config.epochs = config.epochs;
    ckpt.config.output_dir = config.output_dir;
    ckpt.config.threads = config.threads;
    ckpt.config.validate();
    if (train_set.channel_count != ckpt.config.network.input_channels ||
        train_set.class_count != ckpt.config.network.classes) {
      throw DataError(DataErrorKind::ShapeMismatch,
                      "dataset does not match the checkpointed network");
    }
    set_num_threads(ckpt.config.threads);
    report = train(ckpt.network, ckpt.optimizer, train_set, &test_set,
                   ckpt.config.train_config(ckpt.config.steps), first_epoch, on_epoch);
  } else {
    ckpt.config = config;
    ckpt.config.network.input_channels = train_set.channel_count;
    ckpt.config.network.classes = train_set.class_count;
    auto run = run_experiment<Real>(config, train_set, &test_set, on_epoch);
    ckpt.config = run.config;
    ckpt.network = std::move(run.network);
    ckpt.optimizer = std::move(run.optimizer);
    report = std::move(run.report);
  }
  ckpt.epochs_completed = first_epoch + report.epochs.size();

  write_text(config_path, to_json(ckpt.config));
  write_stream(report_path, [&](std::ostream& os) { report.write_csv(os); });
  save_checkpoint(ckpt, ckpt_path);
  json summary = {{"timestamp", utc_timestamp()},
                  {"machine", json::parse(machine_fingerprint_json(ckpt.config.precision,
                                                                   ckpt.config.threads))},
                  {"neuron", std::string(to_string(ckpt.config.network.neuron_kind))},
                  {"epochs_completed", ckpt.epochs_completed},
                  {"best_test_accuracy", report.best_test_accuracy()}};
  if (!report.epochs.empty()) summary["final"] = epoch_json(report.epochs.back());
  write_text(summary_path, summary.dump(2) + "\n");
  std::printf("best test accuracy %.4f; outputs in %s\n", report.best_test_accuracy(),
              out_dir.c_str());
}

template <typename Real>
void eval_impl(const EvalOptions& options) {
  const auto ckpt = load_checkpoint<Real>(options.checkpoint);
  const auto dataset = load_dataset(options.data, Split::Test);
  const auto& net_cfg = ckpt.config.network;
  if (dataset.channel_count != net_cfg.input_channels) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "channel count mismatch: dataset has " + std::to_string(dataset.channel_count) +
                        ", checkpoint expects " + std::to_string(net_cfg.input_channels));
  }
  if (dataset.class_count != net_cfg.classes) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "class count mismatch: dataset has " + std::to_string(dataset.class_count) +
                        ", checkpoint expects " + std::to_string(net_cfg.classes));
  }
  auto cfg = ckpt.config;
  if (options.trials) cfg.eval_trials = *options.trials;
  if (options.seed) cfg.seed = *options.seed;
  cfg.validate();
  const auto tc = cfg.train_config(cfg.steps);
  const auto result = evaluate(ckpt.network, dataset, cfg.eval_trials, tc, cfg.seed);
  json out = {{"accuracy", {{"value", result.accuracy}, {"unit", "fraction"}}},
              {"spike_frequency", {{"value", result.spikes_per_ms}, {"unit", "spikes/ms"}}},
              {"trials", cfg.eval_trials},
              {"samples", dataset.samples.size()},
              {"seed", cfg.seed},
              {"neuron", std::string(to_string(net_cfg.neuron_kind))}};
  const auto text = out.dump(2) + "\n";
  if (options.json_out) {
    claim_output(*options.json_out, options.force);
    write_text(*options.json_out, text);
  }
  std::cout << text;
}

template <typename Real>
RobustnessResult robustness_impl(const RunConfig& config, std::size_t trials, bool quiet) {
  const auto [train_set, test_set] = synthetic_splits(config);
  const auto run = run_experiment<Real>(config, train_set, &test_set, [&](const EpochRow& row) {
    if (!quiet) log_epoch(row, config.epochs);
    return true;
  });
  return robustness_trials(run.network, test_set, trials, run.config.train_config(run.config.steps),
                           Rng(config.seed).split(trials).next_u64());
}

}  // namespace

void claim_output(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw IoError(path.string() + " already exists (pass --force to overwrite)");
  }
}

RunConfig resolve_config(const ConfigSources& sources) {
  RunConfig config;
  if (!sources.config_path.empty()) {
    config = run_config_from_json(read_text(sources.config_path), config);
  }
  for (const auto& item : sources.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects path=value, got '" + item + "'");
    }
    set_field(config, item.substr(0, eq), item.substr(eq + 1));
  }
  for (const auto& [path, value] : sources.flags) set_field(config, path, value);
  config.validate();
  return config;
}

void cmd_synth(const RunConfig& config, const SynthOptions& options) {
  claim_output(options.output, options.force);
  if (options.output.has_parent_path()) ensure_dir(options.output.parent_path());
  const auto dataset = synth_generate(config.synth, Rng(config.seed));
  save_dataset(dataset, options.output);
  std::printf("wrote %zu samples (%u classes, %u channels) to %s\n", dataset.samples.size(),
              dataset.class_count, dataset.channel_count, options.output.c_str());
}

void cmd_train(const RunConfig& config, const TrainOptions& options) {
  if (config.precision == Precision::F32) {
    train_impl<float>(config, options);
  } else {
    train_impl<double>(config, options);
  }
}

void cmd_eval(const EvalOptions& options) {
  if (checkpoint_precision(options.checkpoint) == Precision::F32) {
    eval_impl<float>(options);
  } else {
    eval_impl<double>(options);
  }
}

void cmd_bench(const RunConfig& config, const BenchOptions& options) {
  static const std::vector<std::string> suites = {"speedup", "regsweep", "lossmode",
                                                  "robustness"};
  std::vector<std::string> selected;
  if (options.suite == "all") {
    selected = suites;
  } else if (std::find(suites.begin(), suites.end(), options.suite) != suites.end()) {
    selected = {options.suite};
  } else {
    throw ConfigError("unknown bench suite '" + options.suite +
                      "' (speedup|regsweep|lossmode|robustness|all)");
  }

  const fs::path out_dir = config.output_dir;
  ensure_dir(out_dir);
  std::vector<fs::path> outputs;
  for (const auto& s : selected) {
    if (s == "speedup") {
      outputs.push_back(out_dir / "speedup_samples.csv");
      outputs.push_back(out_dir / "speedup.csv");
    } else {
      outputs.push_back(out_dir / (s + ".csv"));
    }
  }
  outputs.push_back(out_dir / "bench_summary.json");
  outputs.push_back(out_dir / "config.json");
  for (const auto& p : outputs) claim_output(p, options.force);
  write_text(out_dir / "config.json", to_json(config));

  json summary = {{"timestamp", utc_timestamp()},
                  {"machine", json::parse(machine_fingerprint_json(config.precision,
                                                                   config.threads))},
                  {"seed", config.seed}};
  for (const auto& s : selected) {
    if (!options.quiet) std::fprintf(stderr, "running %s\n", s.c_str());
    if (s == "speedup") {
      SpeedupConfig sc;
      if (!options.steps.empty()) sc.steps = options.steps;
      if (options.reps) sc.reps = options.reps;
      sc.batch = options.batch;
      sc.width = options.width;
      sc.input_channels = options.width;
      sc.threads = config.threads;
      sc.precision = config.precision;
      sc.seed = config.seed;
      sc.neuron = config.network.neuron;
      const auto r = speedup_benchmark(sc);
      write_stream(out_dir / "speedup_samples.csv", [&](std::ostream& os) { r.write_samples_csv(os); });
      write_stream(out_dir / "speedup.csv", [&](std::ostream& os) { r.write_summary_csv(os); });
      summary["speedup"] = {{"lif_loglog_slope", r.loglog_slope("lif")},
                            {"spsn_loglog_slope", r.loglog_slope("spsn-sb")},
                            {"ratio_growth", r.ratio_at(sc.steps.back()) / r.ratio_at(sc.steps.front())},
                            {"batch", sc.batch},
                            {"width", sc.width},
                            {"reps", sc.reps}};
    } else if (s == "regsweep") {
      auto thetas = options.thetas;
      if (thetas.empty()) thetas = {0.01, 0.03, 0.06, 0.08, 0.1, 0.2, 0.4, 0.6};
      const auto r = regularization_sweep(thetas, config, options.reps ? options.reps : 3);
      write_stream(out_dir / "regsweep.csv", [&](std::ostream& os) { r.write_csv(os); });
      summary["regsweep"] = {{"runs", r.rows.size()}};
    } else if (s == "lossmode") {
      std::vector<ReadoutMode> modes;
      for (const auto& m : options.modes) modes.push_back(readout_mode_from_string(m));
      if (modes.empty()) {
        modes = {ReadoutMode::MeanOverTime, ReadoutMode::MaxOverTime, ReadoutMode::LastStep};
      }
      const auto r = loss_mode_compare(modes, config, options.reps ? options.reps : 3);
      write_stream(out_dir / "lossmode.csv", [&](std::ostream& os) { r.write_csv(os); });
      summary["lossmode"] = {{"rows", r.rows.size()}};
    } else {
      const auto r = config.precision == Precision::F32
                         ? robustness_impl<float>(config, options.trials, options.quiet)
                         : robustness_impl<double>(config, options.trials, options.quiet);
      write_stream(out_dir / "robustness.csv", [&](std::ostream& os) { r.write_csv(os); });
      summary["robustness"] = {{"stable_fraction", r.stable_fraction()},
                               {"trials", r.trials},
                               {"samples", r.samples.size()}};
    }
  }
  write_text(out_dir / "bench_summary.json", summary.dump(2) + "\n");
}

}  // namespace spsn::cli
