#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spsn/data.hpp"
#include "spsn/network.hpp"
#include "spsn/objective.hpp"
#include "spsn/training.hpp"

namespace spsn {

enum class Precision { F32, F64 };

std::string_view to_string(Precision p);
Precision precision_from_string(std::string_view name);

/// Everything a CLI run needs. Defaults follow the reference experiment
/// table; theta_reg left unset resolves per neuron kind (0.4 for SPSN-SB,
/// 0.1 for SPSN-GS).
struct RunConfig {
  NetworkConfig network;
  AugmentConfig augment;
  bool augment_enabled = true;
  bool reg_enabled = false;
  std::optional<double> theta_reg;
  double reg_weight = 1.0;
  OptimizerConfig optimizer;
  ReadoutMode readout_mode = ReadoutMode::MeanOverTime;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  std::size_t steps = 0;  // 0: derive from the longest sample
  double train_fraction = 0.8;
  std::size_t eval_trials = 1;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
  unsigned threads = 1;
  std::string output_dir = "runs/spsn";
  SynthConfig synth;

  void validate() const;
  double effective_theta_reg() const;
  RegConfig reg() const;
  TrainConfig train_config(std::size_t steps_for_data) const;
};

/// Canonical JSON: keys sorted, fixed number formatting.
std::string to_json(const RunConfig& config);

/// Strict parse on top of `base`: unknown keys and type mismatches raise
/// ConfigError naming the offending field path.
RunConfig run_config_from_json(std::string_view json, const RunConfig& base = RunConfig{});

/// Sets one field from its dotted path and a textual value, e.g.
/// ("network.hidden_size", "256").
void set_field(RunConfig& config, std::string_view path, std::string_view value);

struct FieldHelp {
  std::string path;
  std::string default_value;
  std::string description;
};

std::vector<FieldHelp> run_config_fields();

}  // namespace spsn
