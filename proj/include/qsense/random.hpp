#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qsense {

/// Identifies an independent family of random streams. Every shot of a
/// simulation draws from its own stream derived from (key, shot index), so
/// results do not depend on execution order or worker count.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t pipeline = 0;
  std::uint64_t point = 0;
};

/// Stable 64-bit tag for a pipeline name (FNV-1a).
constexpr std::uint64_t pipeline_tag(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// SplitMix64 generator seeded from a hashed (key, counter) tuple.
class ShotRng {
 public:
  using result_type = std::uint64_t;

  ShotRng(const StreamKey& key, std::uint64_t counter) noexcept
      : state_(mix64(mix64(mix64(mix64(key.seed) ^ key.pipeline) ^ key.point) ^
                     (counter + 0x9e3779b97f4a7c15ull))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() noexcept { return normal_(*this); }

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{};
};

}  // namespace qsense
