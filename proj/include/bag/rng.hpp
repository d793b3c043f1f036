#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace bag {

// SplitMix64 finalizer, used to derive independent seeds from tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Uniform double in [0, 1) built from the top 53 bits of a 64-bit engine.
/// Unlike std::uniform_real_distribution the mapping is fixed, so streams
/// are reproducible across standard library implementations.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

/// Uniform integer in [0, n) by rejection, again independent of the
/// standard library's distribution algorithms.
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = 0;
  do {
    v = eng();
  } while (v >= limit);
  return v % n;
}

}  // namespace bag
