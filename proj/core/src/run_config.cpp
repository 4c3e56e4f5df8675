#include "spsn/run_config.hpp"

#include <algorithm>
#include <functional>
#include <limits>

#include "json.hpp"

namespace spsn {

using nlohmann::json;

std::string_view to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision precision_from_string(std::string_view name) {
  if (name == "f32" || name == "float32") return Precision::F32;
  if (name == "f64" || name == "float64") return Precision::F64;
  throw ConfigError("unknown precision '" + std::string(name) + "' (f32|f64)");
}

void RunConfig::validate() const {
  network.validate();
  augment.validate();
  optimizer.validate();
  synth.validate();
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train.train_fraction: must lie in (0, 1)");
  }
  if (eval_trials < 1) throw ConfigError("train.eval_trials: must be >= 1");
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  if (theta_reg && !(*theta_reg >= 0.0)) throw ConfigError("reg.theta_reg: must be >= 0");
  if (!(reg_weight >= 0.0)) throw ConfigError("reg.weight: must be >= 0");
}

double RunConfig::effective_theta_reg() const {
  if (theta_reg) return *theta_reg;
  return network.neuron_kind == NeuronKind::SpsnGs ? 0.1 : 0.4;
}

RegConfig RunConfig::reg() const { return RegConfig{reg_enabled, effective_theta_reg(), reg_weight}; }

TrainConfig RunConfig::train_config(std::size_t steps_for_data) const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.steps = steps_for_data;
  t.dt = network.neuron.dt;
  t.readout_mode = readout_mode;
  t.augment_enabled = augment_enabled;
  t.augment = augment;
  t.reg = reg();
  t.eval_trials = eval_trials;
  t.seed = seed;
  return t;
}

namespace {

struct Field {
  std::string path;
  std::string description;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

[[noreturn]] void type_error(const std::string& path, const char* expected, const json& v) {
  throw ConfigError(path + ": expected " + expected + ", got " + v.dump());
}

std::size_t as_count(const std::string& path, const json& v) {
  if (!v.is_number_unsigned()) type_error(path, "a non-negative integer", v);
  return v.get<std::size_t>();
}

double as_real(const std::string& path, const json& v) {
  if (!v.is_number()) type_error(path, "a number", v);
  return v.get<double>();
}

bool as_bool(const std::string& path, const json& v) {
  if (!v.is_boolean()) type_error(path, "true or false", v);
  return v.get<bool>();
}

std::string as_text(const std::string& path, const json& v) {
  if (!v.is_string()) type_error(path, "a string", v);
  return v.get<std::string>();
}

template <typename T>
T checked(const std::string& path, auto&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

#define SPSN_COUNT(PATH, MEMBER, DESC)                                                 \
  Field {                                                                              \
    PATH, DESC, [](const RunConfig& c) { return json(c.MEMBER); },                    \
        [](RunConfig& c, const json& v) { c.MEMBER = as_count(PATH, v); }              \
  }
#define SPSN_REAL(PATH, MEMBER, DESC)                                                  \
  Field {                                                                              \
    PATH, DESC, [](const RunConfig& c) { return json(c.MEMBER); },                    \
        [](RunConfig& c, const json& v) { c.MEMBER = as_real(PATH, v); }               \
  }
#define SPSN_BOOL(PATH, MEMBER, DESC)                                                  \
  Field {                                                                              \
    PATH, DESC, [](const RunConfig& c) { return json(c.MEMBER); },                    \
        [](RunConfig& c, const json& v) { c.MEMBER = as_bool(PATH, v); }               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SPSN_COUNT("network.input_channels", network.input_channels,
                 "input channels (taken from the dataset when training)"),
      SPSN_COUNT("network.hidden_layers", network.hidden_layers, "number of hidden layers"),
      SPSN_COUNT("network.hidden_size", network.hidden_size, "neurons per hidden layer"),
      SPSN_COUNT("network.classes", network.classes, "readout neurons (taken from the dataset)"),
      Field{"network.neuron", "hidden neuron model: lif | spsn-sb | spsn-gs | relu",
            [](const RunConfig& c) { return json(std::string(to_string(c.network.neuron_kind))); },
            [](RunConfig& c, const json& v) {
              c.network.neuron_kind = checked<NeuronKind>("network.neuron", [&] {
                return neuron_kind_from_string(as_text("network.neuron", v));
              });
            }},
      SPSN_REAL("network.surrogate_slope", network.surrogate_slope,
                "LIF fast-sigmoid surrogate slope"),
      SPSN_REAL("network.gumbel_temperature", network.gumbel_temperature,
                "SPSN-GS relaxation temperature"),
      SPSN_REAL("network.sb_offset", network.sb_offset,
                "SPSN-SB fires on sigmoid(u - sb_offset)"),
      SPSN_REAL("neuron.tau_syn", network.neuron.tau_syn, "synaptic time constant [s]"),
      SPSN_REAL("neuron.tau_mem", network.neuron.tau_mem, "membrane time constant [s]"),
      SPSN_REAL("neuron.dt", network.neuron.dt, "simulation time step [s]"),
      SPSN_REAL("neuron.u_th", network.neuron.u_th, "LIF firing threshold [V]"),
      SPSN_BOOL("augment.enabled", augment_enabled, "apply augmentation to training batches"),
      SPSN_BOOL("augment.shift", augment.shift_enabled, "random channel shift"),
      SPSN_REAL("augment.k_shift", augment.k_shift, "shift range as a fraction of channels"),
      SPSN_BOOL("augment.scale", augment.scale_enabled, "random time/channel zoom"),
      SPSN_REAL("augment.k_scale", augment.k_scale, "zoom factor range 1 +- k_scale"),
      SPSN_BOOL("reg.enabled", reg_enabled, "add the spike-frequency penalty to the loss"),
      Field{"reg.theta_reg", "rate threshold; null = 0.4 for spsn-sb, 0.1 for spsn-gs",
            [](const RunConfig& c) { return c.theta_reg ? json(*c.theta_reg) : json(nullptr); },
            [](RunConfig& c, const json& v) {
              if (v.is_null()) {
                c.theta_reg.reset();
              } else {
                c.theta_reg = as_real("reg.theta_reg", v);
              }
            }},
      SPSN_REAL("reg.weight", reg_weight, "penalty coefficient"),
      SPSN_REAL("optimizer.lr", optimizer.lr, "Adamax learning rate"),
      SPSN_REAL("optimizer.beta1", optimizer.beta1, "Adamax first-moment decay"),
      SPSN_REAL("optimizer.beta2", optimizer.beta2, "Adamax infinity-norm decay"),
      SPSN_REAL("optimizer.eps", optimizer.eps, "Adamax denominator epsilon"),
      Field{"train.readout_mode", "readout reduction: mean | max | last",
            [](const RunConfig& c) { return json(std::string(to_string(c.readout_mode))); },
            [](RunConfig& c, const json& v) {
              c.readout_mode = checked<ReadoutMode>("train.readout_mode", [&] {
                return readout_mode_from_string(as_text("train.readout_mode", v));
              });
            }},
      SPSN_COUNT("train.epochs", epochs, "training epochs"),
      SPSN_COUNT("train.batch_size", batch_size, "samples per batch"),
      SPSN_COUNT("train.steps", steps, "time bins per sample; 0 = longest sample / dt"),
      SPSN_REAL("train.train_fraction", train_fraction,
                "train share of the stratified split when no test set is given"),
      SPSN_COUNT("train.eval_trials", eval_trials, "inference trials averaged per sample"),
      SPSN_COUNT("seed", seed, "root seed for every random stream"),
      Field{"precision", "floating point precision: f32 | f64",
            [](const RunConfig& c) { return json(std::string(to_string(c.precision))); },
            [](RunConfig& c, const json& v) {
              c.precision = checked<Precision>(
                  "precision", [&] { return precision_from_string(as_text("precision", v)); });
            }},
      Field{"threads", "worker threads for batched FFTs",
            [](const RunConfig& c) { return json(c.threads); },
            [](RunConfig& c, const json& v) {
              const auto n = as_count("threads", v);
              if (n > std::numeric_limits<unsigned>::max()) type_error("threads", "a small count", v);
              c.threads = static_cast<unsigned>(n);
            }},
      Field{"output_dir", "directory for outputs",
            [](const RunConfig& c) { return json(c.output_dir); },
            [](RunConfig& c, const json& v) { c.output_dir = as_text("output_dir", v); }},
      SPSN_COUNT("synth.classes", synth.classes, "synthetic task classes"),
      SPSN_COUNT("synth.channels", synth.channels, "synthetic task channels"),
      SPSN_COUNT("synth.steps", synth.steps, "synthetic sample length in bins"),
      SPSN_COUNT("synth.samples_per_class", synth.samples_per_class, "samples per class"),
      SPSN_COUNT("synth.jitter", synth.jitter, "per-spike time jitter in bins"),
      SPSN_REAL("synth.noise", synth.noise, "spike drop/add probability"),
      SPSN_REAL("synth.density", synth.density, "prototype spike density"),
      SPSN_REAL("synth.dt", synth.dt, "synthetic bin width [s]"),
  };
  return table;
}

#undef SPSN_COUNT
#undef SPSN_REAL
#undef SPSN_BOOL

const Field* find_field(std::string_view path) {
  const auto& table = fields();
  auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.path == path; });
  return it == table.end() ? nullptr : &*it;
}

json::json_pointer pointer_for(const std::string& dotted) {
  std::string p = "/" + dotted;
  std::replace(p.begin(), p.end(), '.', '/');
  return json::json_pointer(p);
}

}  // namespace

std::string to_json(const RunConfig& config) {
  json doc = json::object();
  for (const auto& f : fields()) doc[pointer_for(f.path)] = f.get(config);
  return doc.dump(2) + "\n";
}

RunConfig run_config_from_json(std::string_view text, const RunConfig& base) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig config = base;
  const json flat = doc.flatten();
  for (const auto& [pointer, value] : flat.items()) {
    std::string path = pointer.substr(1);
    std::replace(path.begin(), path.end(), '/', '.');
    const Field* field = find_field(path);
    if (!field) throw ConfigError("unknown configuration key '" + path + "'");
    field->set(config, value);
  }
  return config;
}

void set_field(RunConfig& config, std::string_view path, std::string_view value) {
  const Field* field = find_field(path);
  if (!field) throw ConfigError("unknown configuration key '" + std::string(path) + "'");
  json v;
  try {
    v = json::parse(value.begin(), value.end());
  } catch (const json::parse_error&) {
    v = std::string(value);
  }
  try {
    field->set(config, v);
  } catch (const ConfigError&) {
    if (v.is_string()) throw;
    field->set(config, json(std::string(value)));
  }
}

std::vector<FieldHelp> run_config_fields() {
  const RunConfig defaults;
  std::vector<FieldHelp> out;
  for (const auto& f : fields()) out.push_back({f.path, f.get(defaults).dump(), f.description});
  return out;
}

}  // namespace spsn
