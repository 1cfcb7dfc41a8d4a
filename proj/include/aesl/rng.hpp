#pragma once

#include <cstdint>
#include <random>

#include "aesl/matrix.hpp"

namespace aesl {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream tag (splitmix64 finaliser), so that
/// independent consumers get decorrelated generators from one run seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// rows×cols matrix of N(0, stddev²) draws, filled row-major.
inline Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

}  // namespace aesl
