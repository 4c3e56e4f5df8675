#include "spsn/network.hpp"

#include <cmath>
#include <numeric>

namespace spsn {

std::string_view to_string(NeuronKind kind) {
  switch (kind) {
    case NeuronKind::Lif: return "lif";
    case NeuronKind::SpsnSb: return "spsn-sb";
    case NeuronKind::SpsnGs: return "spsn-gs";
    case NeuronKind::Relu: return "relu";
  }
  return "unknown";
}

NeuronKind neuron_kind_from_string(std::string_view name) {
  if (name == "lif") return NeuronKind::Lif;
  if (name == "spsn-sb") return NeuronKind::SpsnSb;
  if (name == "spsn-gs") return NeuronKind::SpsnGs;
  if (name == "relu") return NeuronKind::Relu;
  throw ConfigError("unknown neuron kind '" + std::string(name) +
                    "' (lif|spsn-sb|spsn-gs|relu)");
}

bool is_spiking(NeuronKind kind) { return kind != NeuronKind::Relu; }
bool is_stochastic(NeuronKind kind) {
  return kind == NeuronKind::SpsnSb || kind == NeuronKind::SpsnGs;
}

void NetworkConfig::validate() const {
  if (input_channels == 0 || hidden_size == 0) throw ConfigError("layer sizes must be > 0");
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (classes < 2) throw ConfigError("classes must be >= 2");
  if (!(surrogate_slope > 0.0)) throw ConfigError("surrogate_slope must be > 0");
  if (!(gumbel_temperature > 0.0)) throw ConfigError("gumbel_temperature must be > 0");
  neuron.validate();
}

std::size_t NetworkConfig::parameter_count() const {
  std::size_t count = input_channels * hidden_size + hidden_size;
  count += (hidden_layers - 1) * (hidden_size * hidden_size + hidden_size);
  count += hidden_size * classes + classes;
  return count;
}

template <typename Real>
std::vector<Tensor<Real>*> Network<Real>::parameters() {
  std::vector<Tensor<Real>*> out;
  for (auto& layer : hidden) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&readout.weight);
  out.push_back(&readout.bias);
  return out;
}

template <typename Real>
std::vector<const Tensor<Real>*> Network<Real>::parameters() const {
  std::vector<const Tensor<Real>*> out;
  for (const auto& layer : hidden) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&readout.weight);
  out.push_back(&readout.bias);
  return out;
}

template <typename Real>
std::vector<std::string> Network<Real>::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    names.push_back("hidden." + std::to_string(i) + ".weight");
    names.push_back("hidden." + std::to_string(i) + ".bias");
  }
  names.emplace_back("readout.weight");
  names.emplace_back("readout.bias");
  return names;
}

namespace {

template <typename Real>
DenseParams<Real> init_dense(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  DenseParams<Real> p{Tensor<Real>(Shape{fan_in, fan_out}), Tensor<Real>(Shape{fan_out})};
  for (auto& w : p.weight.storage()) w = static_cast<Real>(rng.uniform(-bound, bound));
  return p;
}

}  // namespace

template <typename Real>
Network<Real> build_network(const NetworkConfig& config, Rng& rng) {
  config.validate();
  Network<Real> net;
  net.config = config;
  std::size_t fan_in = config.input_channels;
  for (std::size_t l = 0; l < config.hidden_layers; ++l) {
    net.hidden.push_back(init_dense<Real>(fan_in, config.hidden_size, rng));
    fan_in = config.hidden_size;
  }
  net.readout = init_dense<Real>(fan_in, config.classes, rng);
  return net;
}

template <typename Real>
ForwardResult<Real> network_forward(Tape<Real>& tape, const Network<Real>& net,
                                    const Tensor<Real>& input, const Rng& rng,
                                    bool requires_grad) {
  const auto& cfg = net.config;
  if (input.rank() != 3 || input.dim(2) != cfg.input_channels) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "network input must be [T x B x " + std::to_string(cfg.input_channels) +
                        "], got " + shape_string(input.shape()));
  }
  for (auto v : input.data()) {
    if (v != Real{0} && v != Real{1}) {
      throw DataError(DataErrorKind::InvariantViolation, "network input must be binary");
    }
  }

  ForwardResult<Real> out;
  for (const auto* p : net.parameters()) {
    out.parameter_vars.push_back(tape.leaf(*p, requires_grad));
  }

  FiringOptions firing;
  firing.u_offset = cfg.sb_offset;
  firing.temperature = cfg.gumbel_temperature;
  firing.kind = cfg.neuron_kind == NeuronKind::SpsnGs ? FiringKind::GumbelSoftmax
                                                      : FiringKind::SigmoidBernoulli;

  Var<Real> h = tape.constant(input);
  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    auto z = op_dense(h, out.parameter_vars[2 * l], out.parameter_vars[2 * l + 1]);
    switch (cfg.neuron_kind) {
      case NeuronKind::Relu:
        h = op_relu(z);
        continue;
      case NeuronKind::Lif:
        h = lif_forward(z, cfg.neuron, cfg.surrogate_slope).spikes;
        break;
      case NeuronKind::SpsnSb:
      case NeuronKind::SpsnGs: {
        Rng layer_rng = rng.split(l);
        h = spsn_forward(z, cfg.neuron, firing, layer_rng).spikes;
        break;
      }
    }
    out.hidden_spikes.push_back(h);
    out.spike_counts.push_back(static_cast<double>(h.value().sum()));
  }

  const std::size_t r = 2 * net.hidden.size();
  auto z = op_dense(h, out.parameter_vars[r], out.parameter_vars[r + 1]);
  out.readout_potential = readout_forward(z, cfg.neuron, cfg.classes).potential;
  return out;
}

double spikes_per_ms(double total_spikes, std::size_t steps, double dt, std::size_t batch) {
  if (steps == 0) throw ConfigError("spikes_per_ms: T must be > 0");
  if (batch == 0) throw ConfigError("spikes_per_ms: batch must be > 0");
  const double duration_ms = static_cast<double>(steps) * dt * 1000.0;
  return total_spikes / duration_ms / static_cast<double>(batch);
}

double spikes_per_ms(std::span<const double> layer_counts, std::size_t steps, double dt,
                     std::size_t batch) {
  return spikes_per_ms(std::accumulate(layer_counts.begin(), layer_counts.end(), 0.0), steps,
                       dt, batch);
}

template struct Network<float>;
template struct Network<double>;
template Network<float> build_network<float>(const NetworkConfig&, Rng&);
template Network<double> build_network<double>(const NetworkConfig&, Rng&);
template ForwardResult<float> network_forward<float>(Tape<float>&, const Network<float>&,
                                                     const Tensor<float>&, const Rng&, bool);
template ForwardResult<double> network_forward<double>(Tape<double>&, const Network<double>&,
                                                       const Tensor<double>&, const Rng&,
                                                       bool);

}  // namespace spsn
