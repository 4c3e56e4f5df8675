#include "spsn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace spsn {

std::string_view to_string(ReadoutMode mode) {
  switch (mode) {
    case ReadoutMode::MeanOverTime: return "mean";
    case ReadoutMode::MaxOverTime: return "max";
    case ReadoutMode::LastStep: return "last";
  }
  return "unknown";
}

ReadoutMode readout_mode_from_string(std::string_view name) {
  if (name == "mean") return ReadoutMode::MeanOverTime;
  if (name == "max") return ReadoutMode::MaxOverTime;
  if (name == "last") return ReadoutMode::LastStep;
  throw ConfigError("unknown readout mode '" + std::string(name) + "' (mean|max|last)");
}

void RegConfig::validate() const {
  if (!(theta_reg >= 0.0)) throw ConfigError("theta_reg must be >= 0");
  if (!(weight >= 0.0)) throw ConfigError("regularizer weight must be >= 0");
}

template <typename Real>
Var<Real> readout_reduce(const Var<Real>& potential, ReadoutMode mode) {
  const auto& u = potential.value();
  if (u.rank() != 3) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "readout_reduce expects [T x B x C], got " + shape_string(u.shape()));
  }
  const std::size_t steps = u.dim(0);
  const std::size_t lanes = u.dim(1) * u.dim(2);
  if (steps == 0) throw DataError(DataErrorKind::ShapeMismatch, "empty time axis");

  Tensor<Real> out(Shape{u.dim(1), u.dim(2)});
  std::vector<std::size_t> argmax;
  switch (mode) {
    case ReadoutMode::MeanOverTime: {
      std::vector<double> acc(lanes, 0.0);
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t l = 0; l < lanes; ++l) acc[l] += u[t * lanes + l];
      for (std::size_t l = 0; l < lanes; ++l) out[l] = static_cast<Real>(acc[l] / steps);
      break;
    }
    case ReadoutMode::MaxOverTime: {
      argmax.assign(lanes, 0);
      for (std::size_t l = 0; l < lanes; ++l) out[l] = u[l];
      for (std::size_t t = 1; t < steps; ++t) {
        for (std::size_t l = 0; l < lanes; ++l) {
          if (u[t * lanes + l] > out[l]) {
            out[l] = u[t * lanes + l];
            argmax[l] = t;
          }
        }
      }
      break;
    }
    case ReadoutMode::LastStep:
      for (std::size_t l = 0; l < lanes; ++l) out[l] = u[(steps - 1) * lanes + l];
      break;
  }

  const auto uid = potential.id();
  return potential.tape()->record(
      std::move(out), {uid},
      [uid, mode, steps, lanes, argmax = std::move(argmax)](const Tensor<Real>& g,
                                                            Tape<Real>& tape) {
        auto& gu = tape.grad_slot(uid);
        switch (mode) {
          case ReadoutMode::MeanOverTime: {
            const Real inv = Real{1} / static_cast<Real>(steps);
            for (std::size_t t = 0; t < steps; ++t)
              for (std::size_t l = 0; l < lanes; ++l) gu[t * lanes + l] += g[l] * inv;
            break;
          }
          case ReadoutMode::MaxOverTime:
            for (std::size_t l = 0; l < lanes; ++l) gu[argmax[l] * lanes + l] += g[l];
            break;
          case ReadoutMode::LastStep:
            for (std::size_t l = 0; l < lanes; ++l) gu[(steps - 1) * lanes + l] += g[l];
            break;
        }
      });
}

template <typename Real>
Var<Real> cross_entropy(const Var<Real>& logits, std::span<const std::size_t> targets) {
  const auto& z = logits.value();
  if (z.rank() != 2 || z.dim(0) != targets.size()) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    "cross_entropy: logits " + shape_string(z.shape()) + " vs " +
                        std::to_string(targets.size()) + " targets");
  }
  const std::size_t batch = z.dim(0);
  const std::size_t classes = z.dim(1);
  if (batch == 0) throw DataError(DataErrorKind::ShapeMismatch, "cross_entropy: empty batch");
  for (auto y : targets) {
    if (y >= classes) {
      throw DataError(DataErrorKind::InvariantViolation,
                      "class index " + std::to_string(y) + " out of range");
    }
  }

  // Softmax probabilities are kept for backward.
  Tensor<Real> probs(z.shape());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* row = z.data().data() + b * classes;
    const double m = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - m);
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = static_cast<Real>(std::exp(row[c] - m - log_denom));
    }
    loss -= row[targets[b]] - m - log_denom;
  }
  loss /= static_cast<double>(batch);

  const auto zid = logits.id();
  std::vector<std::size_t> y(targets.begin(), targets.end());
  return logits.tape()->record(
      Tensor<Real>::scalar(static_cast<Real>(loss)), {zid},
      [zid, batch, classes, probs = std::move(probs), y = std::move(y)](const Tensor<Real>& g,
                                                                        Tape<Real>& tape) {
        auto& gz = tape.grad_slot(zid);
        const Real scale = g[0] / static_cast<Real>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const Real indicator = c == y[b] ? Real{1} : Real{0};
            gz[b * classes + c] += scale * (probs[b * classes + c] - indicator);
          }
        }
      });
}

template <typename Real>
Var<Real> spike_regularizer(std::span<const Var<Real>> layer_spikes, double theta_reg) {
  if (layer_spikes.empty()) throw ConfigError("spike_regularizer: no spiking layers");
  if (!(theta_reg >= 0.0)) throw ConfigError("theta_reg must be >= 0");
  const auto& first = layer_spikes.front().value();
  const std::size_t steps = first.dim(0);
  const std::size_t batch = first.dim(1);
  std::size_t neurons = 0;
  std::vector<double> total_rate(batch, 0.0);
  for (const auto& layer : layer_spikes) {
    const auto& s = layer.value();
    if (s.rank() != 3 || s.dim(0) != steps || s.dim(1) != batch) {
      throw DataError(DataErrorKind::ShapeMismatch, "spike_regularizer: inconsistent layers");
    }
    const std::size_t width = s.dim(2);
    neurons += width;
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t n = 0; n < width; ++n) total_rate[b] += s[(t * batch + b) * width + n];
  }
  if (neurons == 0) throw ConfigError("spike_regularizer: N must be > 0");

  const double bound = theta_reg * static_cast<double>(neurons);
  std::vector<double> excess(batch);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    excess[b] = std::max(0.0, total_rate[b] / static_cast<double>(steps) - bound);
    loss += excess[b] * excess[b];
  }
  loss /= static_cast<double>(batch);

  std::vector<std::size_t> ids;
  for (const auto& layer : layer_spikes) ids.push_back(layer.id());
  auto* tape = layer_spikes.front().tape();
  return tape->record(
      Tensor<Real>::scalar(static_cast<Real>(loss)), ids,
      [ids, excess = std::move(excess), steps, batch](const Tensor<Real>& g, Tape<Real>& tp) {
        for (auto id : ids) {
          if (!tp.requires_grad(id)) continue;
          auto& gs = tp.grad_slot(id);
          const std::size_t width = gs.dim(2);
          for (std::size_t b = 0; b < batch; ++b) {
            if (excess[b] <= 0.0) continue;
            const Real d = static_cast<Real>(g[0] * 2.0 * excess[b] /
                                             (static_cast<double>(batch) * steps));
            for (std::size_t t = 0; t < steps; ++t)
              for (std::size_t n = 0; n < width; ++n) gs[(t * batch + b) * width + n] += d;
          }
        }
      });
}

double spike_regularizer_value(std::span<const double> rates, double theta_reg) {
  if (rates.empty()) throw ConfigError("spike_regularizer: N must be > 0");
  double total = 0.0;
  for (double r : rates) total += r;
  const double excess = std::max(0.0, total - theta_reg * static_cast<double>(rates.size()));
  return excess * excess;
}

#define SPSN_INSTANTIATE(Real)                                                              \
  template Var<Real> readout_reduce<Real>(const Var<Real>&, ReadoutMode);                 \
  template Var<Real> cross_entropy<Real>(const Var<Real>&, std::span<const std::size_t>); \
  template Var<Real> spike_regularizer<Real>(std::span<const Var<Real>>, double);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
