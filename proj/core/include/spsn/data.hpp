#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "spsn/rng.hpp"
#include "spsn/tensor.hpp"

namespace spsn {

/// Times are kept in integer microseconds, the container's native unit.
struct Event {
  std::uint64_t time_us = 0;
  std::uint32_t channel = 0;

  double seconds() const { return static_cast<double>(time_us) * 1e-6; }
  bool operator==(const Event&) const = default;
};

struct EventSample {
  std::vector<Event> events;  // sorted by time
  std::uint16_t label = 0;
  std::uint64_t duration_us = 0;

  bool operator==(const EventSample&) const = default;
};

enum class Split { Train, Test };

struct EventDataset {
  std::vector<EventSample> samples;
  std::uint32_t channel_count = 0;
  std::uint32_t class_count = 0;
  Split split = Split::Train;

  /// Throws DataError(InvariantViolation) on the first broken invariant.
  void validate() const;
  bool operator==(const EventDataset&) const = default;
};

struct AugmentConfig {
  bool shift_enabled = true;
  double k_shift = 0.1;
  bool scale_enabled = true;
  double k_scale = 0.3;

  bool any() const { return shift_enabled || scale_enabled; }
  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

// Container: little-endian "SPKE" v1, header (channels u32, classes u32,
// samples u64), per sample (label u16, duration_us u64, event_count u64,
// events of (time_us u64, channel u32)), then a CRC-32 of everything before.
inline constexpr char kDatasetMagic[4] = {'S', 'P', 'K', 'E'};
inline constexpr std::uint16_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const EventDataset& dataset);
EventDataset decode_dataset(std::span<const std::uint8_t> bytes, Split split = Split::Train);
void save_dataset(const EventDataset& dataset, const std::filesystem::path& path);
EventDataset load_dataset(const std::filesystem::path& path, Split split = Split::Train);

/// Binary [T x channels] raster; bin = floor(time / dt), events at or past
/// T * dt are dropped, collisions clamp to 1.
template <typename Real>
Tensor<Real> bin_events(const EventSample& sample, std::size_t steps, double dt,
                        std::size_t channels);

/// Moves every spike by `shift` channels, dropping those that leave [0, C).
template <typename Real>
Tensor<Real> shift_channels(const Tensor<Real>& raster, long shift);

/// Draws f uniform in [-k_shift, k_shift] and shifts by round(f * C).
template <typename Real>
Tensor<Real> augment_shift(const Tensor<Real>& raster, double k_shift, Rng& rng);

/// Origin-anchored nearest-neighbour resample: out(t, c) = in(round(t * f),
/// round(c * f)), zero where the lookup falls outside the raster.
template <typename Real>
Tensor<Real> scale_raster(const Tensor<Real>& raster, double factor);

/// Draws one factor uniform in [1 - k_scale, 1 + k_scale] for both axes.
template <typename Real>
Tensor<Real> augment_scale(const Tensor<Real>& raster, double k_scale, Rng& rng);

template <typename Real>
Tensor<Real> augment(const Tensor<Real>& raster, const AugmentConfig& config, Rng& rng);

/// Stacks samples into a [T x B x C] batch, augmenting each with
/// rng.split(position) when `augment` is given.
template <typename Real>
Tensor<Real> make_batch(const EventDataset& dataset, std::span<const std::size_t> indices,
                        std::size_t steps, double dt, const AugmentConfig* augment = nullptr,
                        const Rng* rng = nullptr);

struct SynthConfig {
  std::size_t classes = 5;
  std::size_t channels = 20;
  std::size_t steps = 100;
  std::size_t samples_per_class = 63;
  std::size_t jitter = 2;  // bins
  double noise = 0.01;     // per-spike drop probability, and add rate
  double density = 0.05;
  double dt = 0.001;

  void validate() const;
};

/// One binary [steps x channels] prototype per class, pairwise distinct and
/// non-empty. Drawn from rng.split(0).
std::vector<Tensor<double>> synth_prototypes(const SynthConfig& config, const Rng& rng);

/// Prototype spikes jittered by up to +-jitter bins, dropped with
/// probability `noise`, plus `noise`-rate random additions. Samples are
/// drawn from rng.split(1) and ordered class-major.
EventDataset synth_generate(const SynthConfig& config, const Rng& rng);

/// Per-class seeded shuffle; round(train_fraction * n_class) samples go to
/// the training split.
std::pair<EventDataset, EventDataset> stratified_split(const EventDataset& dataset,
                                                       double train_fraction, const Rng& rng);

/// Fisher-Yates with Rng::uniform_index, identical on every platform.
void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng);

}  // namespace spsn
