#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ikd {

// Engine-portable draws: distribution classes differ across standard
// library implementations, so anything that must reproduce bit-exactly
// from a seed goes through these.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform over [0, n); rejection-free modulo is fine at these scales.
inline std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

// Fisher-Yates with pinned draw semantics.
template <typename T>
void shuffle_in_place(std::vector<T>& values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[pick_index(rng, i)]);
  }
}

}  // namespace ikd
