#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace dualsp {

// Distribution helpers are written against the raw engine output so that a
// seed produces the same stream under every standard library.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return static_cast<std::size_t>(r % bound);
}

template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// Draws an index from an unnormalized nonnegative weight vector.
template <class Weights>
std::size_t sample_categorical(const Weights& w, Rng& rng) {
  double total = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w.size()); ++i) total += w[i];
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w.size()); ++i) {
    if (w[i] <= 0.0) continue;
    last_positive = i;
    if (u < w[i]) return i;
    u -= w[i];
  }
  return last_positive;
}

}  // namespace dualsp
