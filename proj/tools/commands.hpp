#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spsn/run_config.hpp"

namespace spsn::cli {

/// Sources of configuration, applied in order: defaults, config file,
/// --set overrides, then the dedicated flags.
struct ConfigSources {
  std::string config_path;
  std::vector<std::string> overrides;  // "path=value"
  std::vector<std::pair<std::string, std::string>> flags;
};

RunConfig resolve_config(const ConfigSources& sources);

struct SynthOptions {
  std::filesystem::path output;
  bool force = false;
};

struct TrainOptions {
  std::filesystem::path data;
  std::optional<std::filesystem::path> test_data;
  std::optional<std::filesystem::path> resume;
  bool force = false;
  bool quiet = false;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> json_out;
  bool force = false;
};

struct BenchOptions {
  std::string suite;
  bool force = false;
  bool quiet = false;
  std::size_t reps = 0;  // 0: per-suite default
  std::vector<std::size_t> steps;
  std::vector<double> thetas;
  std::vector<std::string> modes;
  std::size_t trials = 10;
  std::size_t width = 128;
  std::size_t batch = 64;
};

void cmd_synth(const RunConfig& config, const SynthOptions& options);
void cmd_train(const RunConfig& config, const TrainOptions& options);
void cmd_eval(const EvalOptions& options);
void cmd_bench(const RunConfig& config, const BenchOptions& options);

/// Fails with IoError when `path` exists and overwriting was not requested.
void claim_output(const std::filesystem::path& path, bool force);

}  // namespace spsn::cli
