#pragma once

// Shared test oracles: random inputs, central finite differences and
// brute-force metric implementations written independently of the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "aesl/matrix.hpp"
#include "aesl/rng.hpp"

namespace testing {

inline aesl::Matrix random_matrix(std::size_t r, std::size_t c, aesl::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  aesl::Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

inline aesl::Matrix random_binary(std::size_t r, std::size_t c, aesl::Rng& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  aesl::Matrix m(r, c);
  for (double& v : m.values()) v = b(rng) ? 1.0 : 0.0;
  return m;
}

/// Central differences of `f` with respect to every entry of `param`
/// (perturbed in place and restored).
inline aesl::Matrix numeric_gradient(const std::function<double()>& f, aesl::Matrix& param,
                                     double h = 1e-6) {
  aesl::Matrix g(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double keep = param.values()[i];
    param.values()[i] = keep + h;
    const double up = f();
    param.values()[i] = keep - h;
    const double down = f();
    param.values()[i] = keep;
    g.values()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ‖a − b‖ / max(‖a‖, ‖b‖, 1e-5), Frobenius norms. The floor keeps
/// gradients that vanish analytically from comparing finite-difference noise
/// against itself.
inline double relative_error(const aesl::Matrix& a, const aesl::Matrix& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
    na += a.values()[i] * a.values()[i];
    nb += b.values()[i] * b.values()[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nb)), 1e-5);
}

// ---- brute-force metrics ---------------------------------------------------

/// AP by explicit precision@rank: for each positive, count the items ranked
/// at or above it (score greater, or equal with smaller index).
inline double brute_ap(const std::vector<double>& s, const std::vector<double>& rel) {
  double total = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (rel[i] == 0.0) continue;
    ++positives;
    int above = 0, above_rel = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const bool before = s[j] > s[i] || (s[j] == s[i] && j <= i);
      if (!before) continue;
      ++above;
      if (rel[j] != 0.0) ++above_rel;
    }
    total += static_cast<double>(above_rel) / above;
  }
  return total / positives;
}

struct Counts {
  double tp = 0, fp = 0, fn = 0;
};

inline Counts brute_counts(const aesl::Matrix& s, const aesl::Matrix& y, std::size_t col) {
  Counts c;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const bool pred = s(r, col) > 0.5;
    const bool truth = y(r, col) == 1.0;
    if (pred && truth) c.tp += 1;
    if (pred && !truth) c.fp += 1;
    if (!pred && truth) c.fn += 1;
  }
  return c;
}

inline double brute_map(const aesl::Matrix& s, const aesl::Matrix& y) {
  double total = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < s.cols(); ++c) {
    std::vector<double> sc, rel;
    for (std::size_t r = 0; r < s.rows(); ++r) {
      sc.push_back(s(r, c));
      rel.push_back(y(r, c));
    }
    if (std::accumulate(rel.begin(), rel.end(), 0.0) == 0.0) continue;
    total += brute_ap(sc, rel);
    ++classes;
  }
  return total / classes;
}

inline double brute_macro_f1(const aesl::Matrix& s, const aesl::Matrix& y) {
  double total = 0.0;
  for (std::size_t c = 0; c < s.cols(); ++c) {
    const Counts k = brute_counts(s, y, c);
    const double p = k.tp + k.fp > 0 ? k.tp / (k.tp + k.fp) : 0.0;
    const double r = k.tp + k.fn > 0 ? k.tp / (k.tp + k.fn) : 0.0;
    total += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return total / static_cast<double>(s.cols());
}

inline double brute_micro_f1(const aesl::Matrix& s, const aesl::Matrix& y) {
  Counts all;
  for (std::size_t c = 0; c < s.cols(); ++c) {
    const Counts k = brute_counts(s, y, c);
    all.tp += k.tp;
    all.fp += k.fp;
    all.fn += k.fn;
  }
  const double denom = 2 * all.tp + all.fp + all.fn;
  return denom > 0 ? 2 * all.tp / denom : 0.0;
}

}  // namespace testing
