#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

// Deterministic randomness shared by every seeded operation. All streams are
// derived from a single 64-bit seed mixed with a fixed operation tag, so the
// same (input, seed) pair reproduces bit-identical results on any platform.

namespace trojkit {

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// SplitMix64 step applied to a plain value; also used as a seed mixer.
constexpr std::uint64_t scramble64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Sub-stream seed for (seed, operation tag, optional index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  return scramble64(scramble64(seed ^ fnv1a64(tag)) ^ index);
}

// SplitMix64 generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Draw in [0, bound) via fixed-point multiply; bias is < bound / 2^64.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Draw in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Fisher-Yates, high index down, so independent reimplementations can agree
// swap for swap.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace trojkit
