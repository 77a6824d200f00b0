#pragma once

#include <cstdint>

namespace sisctl {

/// Counter-based random stream: draw k is a SplitMix64 finalizer applied to
/// seed + k * golden ratio. Identical seed and call sequence give identical
/// draws, and copying a stream forks it at the current position.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t next_u64() noexcept { return mix(seed_ + (++counter_) * kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Seed of the index-th child stream of a master seed (used per replication).
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index) noexcept {
    return mix(mix(master) ^ (index * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL));
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace sisctl
