#pragma once

// Seeded randomness with fully specified output. std::mt19937_64 is defined
// bit-for-bit by the standard; the standard distributions are not, so the
// helpers below stand in for them.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace paramlock {

using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 24 bits of resolution.
inline float uniform_unit(Rng& rng) {
  return static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
}

inline float uniform_range(Rng& rng, float lo, float hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Uniform in [0, bound), bound > 0. Rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace paramlock
