#pragma once

#include <cstdint>
#include <string_view>

namespace spsn {

/// Counter-based generator: the i-th draw of a stream is
/// splitmix64(key + (i + 1) * golden_gamma), where key is derived from the
/// seed. Streams are fully determined by (seed, counter), so results are
/// identical across runs and platforms. Child streams come from split(),
/// never from sharing one Rng between tasks.
class Rng {
public:
  static constexpr std::string_view algorithm = "splitmix64-ctr-v1";

  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept;

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const noexcept;

private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace spsn
