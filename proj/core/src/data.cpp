#include "spsn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "spsn/detail/byte_io.hpp"

namespace spsn {

void EventDataset::validate() const {
  auto fail = [](const std::string& what) {
    throw DataError(DataErrorKind::InvariantViolation, what);
  };
  if (samples.empty()) fail("dataset has no samples");
  if (channel_count == 0) fail("dataset channel_count must be > 0");
  if (class_count == 0) fail("dataset class_count must be > 0");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string where = "sample " + std::to_string(i) + ": ";
    if (s.label >= class_count) fail(where + "label " + std::to_string(s.label) + " out of range");
    for (std::size_t e = 0; e < s.events.size(); ++e) {
      const auto& ev = s.events[e];
      if (ev.time_us >= s.duration_us) fail(where + "event time outside [0, duration)");
      if (ev.channel >= channel_count) fail(where + "event channel out of range");
      if (e > 0 && ev.time_us < s.events[e - 1].time_us) fail(where + "events not sorted by time");
    }
  }
}

void AugmentConfig::validate() const {
  if (!(k_shift >= 0.0 && k_shift < 1.0)) throw ConfigError("k_shift must lie in [0, 1)");
  if (!(k_scale >= 0.0 && k_scale < 1.0)) throw ConfigError("k_scale must lie in [0, 1)");
}

void SynthConfig::validate() const {
  if (classes < 2 || channels == 0 || steps == 0 || samples_per_class == 0) {
    throw ConfigError("synthetic dataset counts must be > 0 (and classes >= 2)");
  }
  if (classes > 65535) throw ConfigError("synthetic dataset: too many classes");
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("synthetic noise must lie in [0, 1)");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("synthetic density must lie in (0, 1]");
  if (!(dt > 0.0)) throw ConfigError("synthetic dt must be > 0");
}

// ---------------------------------------------------------------------------
// Container

std::vector<std::uint8_t> encode_dataset(const EventDataset& dataset) {
  dataset.validate();
  detail::ByteWriter w;
  w.bytes(kDatasetMagic, 4);
  w.u16(kDatasetVersion);
  w.u32(dataset.channel_count);
  w.u32(dataset.class_count);
  w.u64(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    w.u16(s.label);
    w.u64(s.duration_us);
    w.u64(s.events.size());
    for (const auto& e : s.events) {
      w.u64(e.time_us);
      w.u32(e.channel);
    }
  }
  w.u32(detail::crc32(w.buffer()));
  return std::move(w).take();
}

EventDataset decode_dataset(std::span<const std::uint8_t> bytes, Split split) {
  detail::ByteReader r(bytes, "dataset");
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw DataError(DataErrorKind::MagicMismatch, "dataset: bad magic (expected SPKE)");
  }
  const auto version = r.u16();
  if (version != kDatasetVersion) {
    throw DataError(DataErrorKind::VersionMismatch,
                    "dataset: unsupported version " + std::to_string(version));
  }
  EventDataset ds;
  ds.split = split;
  ds.channel_count = r.u32();
  ds.class_count = r.u32();
  const auto count = r.u64();
  // Each sample needs at least 18 bytes; reject absurd counts before reserving.
  if (count > r.remaining() / 18) {
    throw DataError(DataErrorKind::Truncated, "dataset: declares " + std::to_string(count) +
                                                  " samples but the file is too short");
  }
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.label = r.u16();
    s.duration_us = r.u64();
    const auto events = r.u64();
    if (events > r.remaining() / 12) {
      throw DataError(DataErrorKind::Truncated, "dataset: event list runs past end of file");
    }
    s.events.resize(events);
    for (auto& e : s.events) {
      e.time_us = r.u64();
      e.channel = r.u32();
    }
  }
  const std::size_t payload = r.position();
  const auto stored_crc = r.u32();
  if (r.remaining() != 0) {
    throw DataError(DataErrorKind::InvariantViolation, "dataset: trailing bytes after footer");
  }
  if (stored_crc != detail::crc32(bytes.first(payload))) {
    throw DataError(DataErrorKind::ChecksumMismatch, "dataset: CRC-32 mismatch");
  }
  ds.validate();
  return ds;
}

void save_dataset(const EventDataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, encode_dataset(dataset));
}

EventDataset load_dataset(const std::filesystem::path& path, Split split) {
  return decode_dataset(detail::read_file(path), split);
}

// ---------------------------------------------------------------------------
// Rasters

template <typename Real>
Tensor<Real> bin_events(const EventSample& sample, std::size_t steps, double dt,
                        std::size_t channels) {
  if (!(dt > 0.0)) throw ConfigError("bin_events: dt must be > 0");
  Tensor<Real> raster(Shape{steps, channels});
  // Integer binning when dt is a whole number of microseconds, so that
  // boundaries such as 3 ms / 1 ms are exact.
  const double dt_us = dt * 1e6;
  const auto dt_whole = static_cast<std::uint64_t>(std::llround(dt_us));
  const bool integral = dt_whole > 0 && std::abs(dt_us - static_cast<double>(dt_whole)) < 1e-6;
  for (const auto& e : sample.events) {
    if (e.channel >= channels) {
      throw DataError(DataErrorKind::InvariantViolation,
                      "bin_events: channel " + std::to_string(e.channel) + " out of range");
    }
    const std::uint64_t bin = integral ? e.time_us / dt_whole
                                       : static_cast<std::uint64_t>(std::floor(e.seconds() / dt));
    if (bin >= steps) continue;
    raster[bin * channels + e.channel] = Real{1};
  }
  return raster;
}

namespace {

template <typename Real>
void require_raster(const Tensor<Real>& raster, const char* what) {
  if (raster.rank() != 2) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    std::string(what) + ": expected [T x C], got " + shape_string(raster.shape()));
  }
}

}  // namespace

template <typename Real>
Tensor<Real> shift_channels(const Tensor<Real>& raster, long shift) {
  require_raster(raster, "shift_channels");
  const std::size_t steps = raster.dim(0);
  const long channels = static_cast<long>(raster.dim(1));
  Tensor<Real> out(raster.shape());
  for (std::size_t t = 0; t < steps; ++t) {
    for (long c = 0; c < channels; ++c) {
      const long dst = c + shift;
      if (dst < 0 || dst >= channels) continue;
      out[t * channels + dst] = raster[t * channels + c];
    }
  }
  return out;
}

template <typename Real>
Tensor<Real> augment_shift(const Tensor<Real>& raster, double k_shift, Rng& rng) {
  require_raster(raster, "augment_shift");
  const double f = rng.uniform(-k_shift, k_shift);
  return shift_channels(raster, std::lround(f * static_cast<double>(raster.dim(1))));
}

template <typename Real>
Tensor<Real> scale_raster(const Tensor<Real>& raster, double factor) {
  require_raster(raster, "scale_raster");
  if (!(factor > 0.0)) throw ConfigError("scale factor must be > 0");
  const std::size_t steps = raster.dim(0);
  const std::size_t channels = raster.dim(1);
  Tensor<Real> out(raster.shape());
  auto lookup = [factor](std::size_t i) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(i) * factor + 0.5));
  };
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t src_t = lookup(t);
    if (src_t >= steps) break;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t src_c = lookup(c);
      if (src_c >= channels) break;
      out[t * channels + c] = raster[src_t * channels + src_c];
    }
  }
  return out;
}

template <typename Real>
Tensor<Real> augment_scale(const Tensor<Real>& raster, double k_scale, Rng& rng) {
  return scale_raster(raster, rng.uniform(1.0 - k_scale, 1.0 + k_scale));
}

template <typename Real>
Tensor<Real> augment(const Tensor<Real>& raster, const AugmentConfig& config, Rng& rng) {
  Tensor<Real> out = raster;
  if (config.shift_enabled) out = augment_shift(out, config.k_shift, rng);
  if (config.scale_enabled) out = augment_scale(out, config.k_scale, rng);
  return out;
}

template <typename Real>
Tensor<Real> make_batch(const EventDataset& dataset, std::span<const std::size_t> indices,
                        std::size_t steps, double dt, const AugmentConfig* augment_cfg,
                        const Rng* rng) {
  if (augment_cfg && !rng) throw std::invalid_argument("make_batch: augmentation needs an rng");
  const std::size_t batch = indices.size();
  const std::size_t channels = dataset.channel_count;
  Tensor<Real> out(Shape{steps, batch, channels});
  for (std::size_t b = 0; b < batch; ++b) {
    auto raster = bin_events<Real>(dataset.samples.at(indices[b]), steps, dt, channels);
    if (augment_cfg && augment_cfg->any()) {
      Rng sample_rng = rng->split(b);
      raster = augment(raster, *augment_cfg, sample_rng);
    }
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(raster.data().data() + t * channels, channels,
                  out.data().data() + (t * batch + b) * channels);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic task

std::vector<Tensor<double>> synth_prototypes(const SynthConfig& config, const Rng& rng) {
  config.validate();
  Rng proto_rng = rng.split(0);
  std::vector<Tensor<double>> prototypes;
  while (prototypes.size() < config.classes) {
    Tensor<double> p(Shape{config.steps, config.channels});
    for (auto& v : p.storage()) v = proto_rng.uniform() < config.density ? 1.0 : 0.0;
    const bool empty = p.sum() == 0.0;
    const bool duplicate = std::find(prototypes.begin(), prototypes.end(), p) != prototypes.end();
    if (!empty && !duplicate) prototypes.push_back(std::move(p));
  }
  return prototypes;
}

EventDataset synth_generate(const SynthConfig& config, const Rng& rng) {
  const auto prototypes = synth_prototypes(config, rng);
  Rng sample_rng = rng.split(1);

  const auto dt_us = static_cast<std::uint64_t>(std::llround(config.dt * 1e6));
  if (dt_us == 0) throw ConfigError("synthetic dt must be at least 1 us");
  const long steps = static_cast<long>(config.steps);
  const long jitter = static_cast<long>(config.jitter);

  EventDataset ds;
  ds.channel_count = static_cast<std::uint32_t>(config.channels);
  ds.class_count = static_cast<std::uint32_t>(config.classes);
  for (std::size_t cls = 0; cls < config.classes; ++cls) {
    const auto& proto = prototypes[cls];
    for (std::size_t k = 0; k < config.samples_per_class; ++k) {
      std::vector<std::pair<long, std::uint32_t>> spikes;
      for (long t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < config.channels; ++c) {
          if (proto[static_cast<std::size_t>(t) * config.channels + c] == 0.0) continue;
          long shifted = t;
          if (jitter > 0) {
            shifted += static_cast<long>(sample_rng.uniform_index(2 * jitter + 1)) - jitter;
          }
          const bool dropped = config.noise > 0.0 && sample_rng.uniform() < config.noise;
          if (dropped) continue;
          spikes.emplace_back(std::clamp(shifted, 0L, steps - 1), static_cast<std::uint32_t>(c));
        }
      }
      if (config.noise > 0.0) {
        const std::size_t cells = config.steps * config.channels;
        for (std::size_t cell = 0; cell < cells; ++cell) {
          if (sample_rng.uniform() < config.noise * config.density) {
            spikes.emplace_back(static_cast<long>(cell / config.channels),
                                static_cast<std::uint32_t>(cell % config.channels));
          }
        }
      }
      std::sort(spikes.begin(), spikes.end());
      spikes.erase(std::unique(spikes.begin(), spikes.end()), spikes.end());

      EventSample s;
      s.label = static_cast<std::uint16_t>(cls);
      s.duration_us = config.steps * dt_us;
      for (const auto& [t, c] : spikes) {
        s.events.push_back({static_cast<std::uint64_t>(t) * dt_us + dt_us / 2, c});
      }
      ds.samples.push_back(std::move(s));
    }
  }
  ds.validate();
  return ds;
}

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::swap(indices[i - 1], indices[rng.uniform_index(i)]);
  }
}

std::pair<EventDataset, EventDataset> stratified_split(const EventDataset& dataset,
                                                       double train_fraction, const Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  EventDataset train, test;
  for (auto* part : {&train, &test}) {
    part->channel_count = dataset.channel_count;
    part->class_count = dataset.class_count;
  }
  train.split = Split::Train;
  test.split = Split::Test;
  for (std::uint32_t cls = 0; cls < dataset.class_count; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if (dataset.samples[i].label == cls) members.push_back(i);
    }
    Rng class_rng = rng.split(cls);
    shuffle_indices(members, class_rng);
    const auto n_train = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < n_train ? train : test).samples.push_back(dataset.samples[members[k]]);
    }
  }
  return {std::move(train), std::move(test)};
}

#define SPSN_INSTANTIATE(Real)                                                              \
  template Tensor<Real> bin_events<Real>(const EventSample&, std::size_t, double,         \
                                         std::size_t);                                    \
  template Tensor<Real> shift_channels<Real>(const Tensor<Real>&, long);                  \
  template Tensor<Real> augment_shift<Real>(const Tensor<Real>&, double, Rng&);           \
  template Tensor<Real> scale_raster<Real>(const Tensor<Real>&, double);                  \
  template Tensor<Real> augment_scale<Real>(const Tensor<Real>&, double, Rng&);           \
  template Tensor<Real> augment<Real>(const Tensor<Real>&, const AugmentConfig&, Rng&);   \
  template Tensor<Real> make_batch<Real>(const EventDataset&, std::span<const std::size_t>, \
                                         std::size_t, double, const AugmentConfig*,       \
                                         const Rng*);

SPSN_INSTANTIATE(float)
SPSN_INSTANTIATE(double)

#undef SPSN_INSTANTIATE

}  // namespace spsn
