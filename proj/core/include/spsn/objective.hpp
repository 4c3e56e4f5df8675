#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "spsn/autodiff.hpp"

namespace spsn {

enum class ReadoutMode { MeanOverTime, MaxOverTime, LastStep };

std::string_view to_string(ReadoutMode mode);
ReadoutMode readout_mode_from_string(std::string_view name);

struct RegConfig {
  bool enabled = false;
  double theta_reg = 0.4;
  double weight = 1.0;

  void validate() const;
  bool operator==(const RegConfig&) const = default;
};

/// [T x B x C] -> [B x C]. Max routes its subgradient to the earliest
/// arg-max time step.
template <typename Real>
Var<Real> readout_reduce(const Var<Real>& potential, ReadoutMode mode);

/// Mean over the batch of -log softmax(logits)[target], max-shifted.
template <typename Real>
Var<Real> cross_entropy(const Var<Real>& logits, std::span<const std::size_t> targets);

/// Squared hinge on the network-wide mean spike rate:
///   relu(sum_n rate_n - theta * N)^2
/// evaluated per sample over every hidden neuron of every layer in
/// `layer_spikes` ([T x B x N_l] each) and averaged over the batch.
template <typename Real>
Var<Real> spike_regularizer(std::span<const Var<Real>> layer_spikes, double theta_reg);

/// Same penalty for one sample given per-neuron mean rates.
double spike_regularizer_value(std::span<const double> rates, double theta_reg);

}  // namespace spsn
