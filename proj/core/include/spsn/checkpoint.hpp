#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spsn/network.hpp"
#include "spsn/run_config.hpp"
#include "spsn/training.hpp"

namespace spsn {

// Layout: "SPCK", version u16, real width u8 (4 or 8), canonical config JSON
// (u64 length + bytes), seed u64, epochs_completed u64, tensor count u32,
// tensors as (name, rank u32, dims u64..., raw values), Adamax step u64 and
// hyperparameters f64 x4, m tensors, u_inf tensors, CRC-32 of all
// preceding bytes.
inline constexpr char kCheckpointMagic[4] = {'S', 'P', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename Real>
struct Checkpoint {
  RunConfig config;
  Network<Real> network;
  AdamaxState<Real> optimizer;
  std::uint64_t epochs_completed = 0;
};

template <typename Real>
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<Real>& checkpoint);

/// Checks magic, version, CRC, precision, and that every tensor matches the
/// network described by the embedded config.
template <typename Real>
Checkpoint<Real> decode_checkpoint(std::span<const std::uint8_t> bytes);

template <typename Real>
void save_checkpoint(const Checkpoint<Real>& checkpoint, const std::filesystem::path& path);

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& path);

/// Reads only the header, for choosing the instantiation to load.
Precision checkpoint_precision(const std::filesystem::path& path);

}  // namespace spsn
