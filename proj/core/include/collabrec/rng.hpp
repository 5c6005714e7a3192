#pragma once

#include "collabrec/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace collabrec {

// FNV-1a 64-bit hash, used for stage-seed derivation and data fingerprints.
inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64_bytes(const void* data, size_t n,
                              uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// All randomness flows from one root seed, split per stage by name.
inline uint64_t stage_seed(uint64_t root, std::string_view stage) {
  return root ^ fnv1a64(stage);
}

using Rng = std::mt19937_64;

template <class T>
MatT<T> gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, T stddev) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MatT<T> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<T>(dist(rng)) * stddev;
  return m;
}

}  // namespace collabrec
