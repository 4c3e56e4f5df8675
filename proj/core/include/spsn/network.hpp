#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spsn/autodiff.hpp"
#include "spsn/neurons.hpp"
#include "spsn/rng.hpp"

namespace spsn {

enum class NeuronKind { Lif, SpsnSb, SpsnGs, Relu };

std::string_view to_string(NeuronKind kind);
NeuronKind neuron_kind_from_string(std::string_view name);
bool is_spiking(NeuronKind kind);
bool is_stochastic(NeuronKind kind);

struct NetworkConfig {
  std::size_t input_channels = 700;
  std::size_t hidden_layers = 3;
  std::size_t hidden_size = 128;
  std::size_t classes = 20;
  NeuronKind neuron_kind = NeuronKind::SpsnSb;
  NeuronParams neuron;
  double surrogate_slope = 10.0;
  double gumbel_temperature = 1.0;
  double sb_offset = 0.0;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const NetworkConfig&) const = default;
};

template <typename Real>
struct DenseParams {
  Tensor<Real> weight;  // [in x out]
  Tensor<Real> bias;    // [out]
};

/// Feedforward stack: (dense -> neuron stage) x hidden_layers, then a dense
/// projection into a non-spiking leaky-integrator readout.
template <typename Real>
struct Network {
  NetworkConfig config;
  std::vector<DenseParams<Real>> hidden;
  DenseParams<Real> readout;

  /// Parameters in a fixed order: hidden weight/bias pairs, then readout.
  std::vector<Tensor<Real>*> parameters();
  std::vector<const Tensor<Real>*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
template <typename Real>
Network<Real> build_network(const NetworkConfig& config, Rng& rng);

template <typename Real>
struct ForwardResult {
  Var<Real> readout_potential;         // [T x B x classes]
  std::vector<Var<Real>> hidden_spikes;  // empty for the ReLU network
  std::vector<double> spike_counts;      // per hidden layer, whole batch
  std::vector<Var<Real>> parameter_vars; // same order as Network::parameters()
};

/// Full differentiable pass over a binary [T x B x input_channels] raster.
/// Stochastic layers draw from rng.split(layer index).
template <typename Real>
ForwardResult<Real> network_forward(Tape<Real>& tape, const Network<Real>& net,
                                    const Tensor<Real>& input, const Rng& rng,
                                    bool requires_grad = true);

/// Mean spikes per millisecond per sample: total / (T * dt * 1000) / batch.
double spikes_per_ms(double total_spikes, std::size_t steps, double dt, std::size_t batch);
double spikes_per_ms(std::span<const double> layer_counts, std::size_t steps, double dt,
                     std::size_t batch);

}  // namespace spsn
