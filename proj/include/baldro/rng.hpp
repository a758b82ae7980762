// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace baldro {

// mt19937_64 driven without std distributions, so streams are identical
// across standard library implementations.

/// Uniform integer in [0, n). Requires n > 0.
inline int next_int(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [-scale, scale].
inline double next_symmetric(std::mt19937_64& rng, double scale) {
  return (2.0 * next_unit(rng) - 1.0) * scale;
}

/// Fisher-Yates shuffle driven by the raw engine stream.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng() % static_cast<std::uint64_t>(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace baldro
