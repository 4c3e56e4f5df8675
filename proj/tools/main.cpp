#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "spsn/errors.hpp"

namespace {

namespace cli = spsn::cli;

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4, kIo = 5 };

std::string field_table() {
  std::ostringstream os;
  os << "\nConfiguration fields (JSON path, default):\n";
  for (const auto& f : spsn::run_config_fields()) {
    os << "  " << f.path << " = " << f.default_value << "\n      " << f.description << "\n";
  }
  os << "\nPrecedence: defaults < --config file < --set path=value < dedicated flags.\n"
        "Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric error, 5 I/O error.\n";
  return os.str();
}

// Options accepted by every config-driven subcommand.
struct Shared {
  cli::ConfigSources sources;
  std::string seed, precision, threads, out;
  bool force = false;
  bool quiet = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", sources.config_path, "JSON run configuration")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", sources.overrides, "override one field, e.g. --set train.epochs=50");
    cmd->add_option("--seed", seed, "root seed");
    cmd->add_option("--precision", precision, "f32 or f64");
    cmd->add_option("--threads", threads, "worker threads for batched FFTs");
    cmd->add_flag("--force", force, "overwrite existing outputs");
    cmd->add_flag("-q,--quiet", quiet, "suppress progress output");
  }

  void flag(const char* path, const std::string& value) {
    if (!value.empty()) sources.flags.emplace_back(path, value);
  }

  spsn::RunConfig resolve() {
    flag("seed", seed);
    flag("precision", precision);
    flag("threads", threads);
    flag("output_dir", out);
    return cli::resolve_config(sources);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network training with parallel stochastic neurons"};
  app.require_subcommand(1);
  app.footer(field_table());

  Shared shared;

  auto* synth = app.add_subcommand("synth", "generate the synthetic spike-pattern dataset");
  shared.attach(synth);
  cli::SynthOptions synth_opts;
  std::string synth_out = "data/synth.spke";
  synth->add_option("-o,--output", synth_out, "dataset file")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a network and write report + checkpoint");
  shared.attach(train);
  cli::TrainOptions train_opts;
  std::string neuron, epochs, readout, batch, steps, theta, lr;
  bool no_augment = false, reg = false;
  train->add_option("-d,--data", train_opts.data, "training dataset (split when --test is absent)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--test", train_opts.test_data, "held-out dataset")->check(CLI::ExistingFile);
  train->add_option("--resume", train_opts.resume, "continue from a checkpoint")
      ->check(CLI::ExistingFile);
  train->add_option("-o,--out", shared.out, "output directory");
  train->add_option("--neuron", neuron, "lif | spsn-sb | spsn-gs | relu");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--readout", readout, "mean | max | last");
  train->add_option("--batch-size", batch, "samples per batch");
  train->add_option("--steps", steps, "time bins per sample (0 = from data)");
  train->add_option("--lr", lr, "Adamax learning rate");
  train->add_flag("--no-augment", no_augment, "disable shift/scale augmentation");
  train->add_flag("--reg", reg, "enable the spike-frequency penalty");
  train->add_option("--theta-reg", theta, "penalty rate threshold (implies --reg)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  cli::EvalOptions eval_opts;
  eval->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("-d,--data", eval_opts.data, "dataset")->required()->check(CLI::ExistingFile);
  eval->add_option("--trials", eval_opts.trials, "inference trials averaged per sample");
  eval->add_option("--seed", eval_opts.seed, "noise seed (default: the training seed)");
  eval->add_option("--json", eval_opts.json_out, "also write the JSON result here");
  eval->add_flag("--force", eval_opts.force, "overwrite an existing --json file");

  auto* bench = app.add_subcommand("bench", "run experiment harnesses");
  shared.attach(bench);
  cli::BenchOptions bench_opts;
  std::string bench_neuron, bench_epochs;
  bench->add_option("suite", bench_opts.suite, "speedup | regsweep | lossmode | robustness | all")
      ->required();
  bench->add_option("-o,--out", shared.out, "output directory");
  bench->add_option("--reps", bench_opts.reps, "repetitions (default 10 for speedup, else 3)");
  bench->add_option("--steps-list", bench_opts.steps, "sequence lengths for speedup")
      ->delimiter(',');
  bench->add_option("--thetas", bench_opts.thetas, "theta_reg values for regsweep")
      ->delimiter(',');
  bench->add_option("--modes", bench_opts.modes, "readout modes for lossmode")->delimiter(',');
  bench->add_option("--trials", bench_opts.trials, "trials per sample for robustness")
      ->capture_default_str();
  bench->add_option("--width", bench_opts.width, "speedup layer width")->capture_default_str();
  bench->add_option("--batch", bench_opts.batch, "speedup batch size")->capture_default_str();
  bench->add_option("--neuron", bench_neuron, "neuron model for training suites");
  bench->add_option("--epochs", bench_epochs, "epochs for training suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) {
      synth_opts.output = synth_out;
      synth_opts.force = shared.force;
      cli::cmd_synth(shared.resolve(), synth_opts);
    } else if (*train) {
      shared.flag("network.neuron", neuron);
      shared.flag("train.epochs", epochs);
      shared.flag("train.readout_mode", readout);
      shared.flag("train.batch_size", batch);
      shared.flag("train.steps", steps);
      shared.flag("optimizer.lr", lr);
      if (no_augment) shared.flag("augment.enabled", "false");
      if (reg || !theta.empty()) shared.flag("reg.enabled", "true");
      shared.flag("reg.theta_reg", theta);
      train_opts.force = shared.force;
      train_opts.quiet = shared.quiet;
      cli::cmd_train(shared.resolve(), train_opts);
    } else if (*eval) {
      cli::cmd_eval(eval_opts);
    } else if (*bench) {
      shared.flag("network.neuron", bench_neuron);
      shared.flag("train.epochs", bench_epochs);
      bench_opts.force = shared.force;
      bench_opts.quiet = shared.quiet;
      cli::cmd_bench(shared.resolve(), bench_opts);
    }
  } catch (const spsn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const spsn::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const spsn::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumeric;
  } catch (const spsn::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
