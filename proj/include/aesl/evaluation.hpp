#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "aesl/matrix.hpp"

namespace aesl {

/// Mean over relevant items of precision at their rank; scores sorted
/// descending, ties by ascending index. Throws DomainError when nothing is
/// relevant.
double average_precision(std::span<const double> scores, std::span<const double> relevance);

/// Per-class AP averaged over classes with at least one positive; throws
/// DomainError when there is none.
double mean_ap(const Matrix& scores, const Matrix& labels);
/// Mean per-class F1 at the 0.5 threshold; a class with no TP contributes 0.
double macro_f1(const Matrix& scores, const Matrix& labels);
/// F1 of the pooled TP/FP/FN counts at the 0.5 threshold.
double micro_f1(const Matrix& scores, const Matrix& labels);

struct StepRecord {
  std::size_t task = 0;
  std::size_t seen_classes = 0;
  double map = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::optional<double> erg_pcc;
};

StepRecord evaluate_step(std::size_t task, const Matrix& scores, const Matrix& labels);

struct MetricsReport {
  std::vector<StepRecord> steps;

  /// Mean of per-step mAP (the first task included).
  double average_accuracy() const;
  const StepRecord& last() const;
};

/// Ranks of k algorithms (columns) on N datasets (rows); rank 1 is best.
struct RankTable {
  std::vector<std::vector<double>> ranks;  // N × k

  std::size_t datasets() const noexcept { return ranks.size(); }
  std::size_t algorithms() const noexcept { return ranks.empty() ? 0 : ranks.front().size(); }
  /// R_j = (1/N) Σ_i r_i^j
  std::vector<double> average_ranks() const;
};

/// Average-rank tie handling; `higher_is_better` ranks the largest score 1.
RankTable rank_table(const std::vector<std::vector<double>>& scores, bool higher_is_better = true);

struct FriedmanResult {
  double chi_square = 0.0;  // χ²_F
  double f_statistic = 0.0;  // F_F
};

/// Throws DegenerateError when N(k−1) − χ²_F vanishes (perfect agreement).
FriedmanResult friedman(const RankTable& table);

/// Upper-α quantile of F(k−1, (k−1)(N−1)), the rejection threshold for F_F.
double friedman_critical_value(double alpha, std::size_t k, std::size_t n);

/// Studentized-range based Nemenyi constant q_α for k algorithms
/// (α ∈ {0.05, 0.10}, 2 ≤ k ≤ 10).
double nemenyi_q(double alpha, std::size_t k);

/// CD = q_α·sqrt(k(k+1) / 6N).
double nemenyi_cd(double q_alpha, std::size_t k, std::size_t n);

}  // namespace aesl
