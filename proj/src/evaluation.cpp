#include "aesl/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>

#include "aesl/error.hpp"

namespace aesl {

double average_precision(std::span<const double> scores, std::span<const double> relevance) {
  if (scores.size() != relevance.size())
    throw ShapeError("average_precision: scores and relevance differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0;
  double total = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevance[order[rank]] > 0.5) {
      hits += 1.0;
      total += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) throw DomainError("average_precision: no relevant item");
  return total / hits;
}

namespace {

void check_pair(const Matrix& scores, const Matrix& labels, const char* what) {
  if (scores.empty() || labels.empty())
    throw ShapeError(std::string(what) + ": empty matrix");
  if (!scores.same_shape(labels))
    throw ShapeError(std::string(what) + ": scores " + scores.shape_string() + " vs labels " +
                     labels.shape_string());
}

struct Confusion {
  double tp = 0, fp = 0, fn = 0;
};

std::vector<Confusion> confusion(const Matrix& scores, const Matrix& labels) {
  std::vector<Confusion> out(scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    for (std::size_t c = 0; c < scores.cols(); ++c) {
      const bool pred = scores(r, c) > 0.5;
      const bool truth = labels(r, c) > 0.5;
      if (pred && truth) out[c].tp += 1;
      if (pred && !truth) out[c].fp += 1;
      if (!pred && truth) out[c].fn += 1;
    }
  }
  return out;
}

double f1(const Confusion& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom > 0.0 ? 2.0 * c.tp / denom : 0.0;
}

}  // namespace

double mean_ap(const Matrix& scores, const Matrix& labels) {
  check_pair(scores, labels, "mean_ap");
  double total = 0.0;
  std::size_t classes = 0;
  std::vector<double> s(scores.rows());
  std::vector<double> y(scores.rows());
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    bool any = false;
    for (std::size_t r = 0; r < scores.rows(); ++r) {
      s[r] = scores(r, c);
      y[r] = labels(r, c);
      any = any || y[r] > 0.5;
    }
    if (!any) continue;
    total += average_precision(s, y);
    ++classes;
  }
  if (classes == 0) throw DomainError("mean_ap: no class has a positive instance");
  return total / static_cast<double>(classes);
}

double macro_f1(const Matrix& scores, const Matrix& labels) {
  check_pair(scores, labels, "macro_f1");
  double total = 0.0;
  const auto conf = confusion(scores, labels);
  for (const auto& c : conf) total += f1(c);
  return total / static_cast<double>(conf.size());
}

double micro_f1(const Matrix& scores, const Matrix& labels) {
  check_pair(scores, labels, "micro_f1");
  Confusion pooled;
  for (const auto& c : confusion(scores, labels)) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  return f1(pooled);
}

StepRecord evaluate_step(std::size_t task, const Matrix& scores, const Matrix& labels) {
  return {task, scores.cols(), mean_ap(scores, labels), macro_f1(scores, labels),
          micro_f1(scores, labels), std::nullopt};
}

double MetricsReport::average_accuracy() const {
  if (steps.empty()) throw Error("MetricsReport: no recorded steps");
  double total = 0.0;
  for (const auto& s : steps) total += s.map;
  return total / static_cast<double>(steps.size());
}

const StepRecord& MetricsReport::last() const {
  if (steps.empty()) throw Error("MetricsReport: no recorded steps");
  return steps.back();
}

std::vector<double> RankTable::average_ranks() const {
  std::vector<double> avg(algorithms(), 0.0);
  for (const auto& row : ranks)
    for (std::size_t j = 0; j < row.size(); ++j) avg[j] += row[j];
  for (double& v : avg) v /= static_cast<double>(datasets());
  return avg;
}

RankTable rank_table(const std::vector<std::vector<double>>& scores, bool higher_is_better) {
  RankTable t;
  for (const auto& row : scores) {
    if (!t.ranks.empty() && row.size() != t.ranks.front().size())
      throw ShapeError("rank_table: ragged score table");
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return higher_is_better ? row[a] > row[b] : row[a] < row[b];
    });
    std::vector<double> r(row.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && row[order[j + 1]] == row[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t p = i; p <= j; ++p) r[order[p]] = avg;
      i = j + 1;
    }
    t.ranks.push_back(std::move(r));
  }
  return t;
}

FriedmanResult friedman(const RankTable& table) {
  const double n = static_cast<double>(table.datasets());
  const double k = static_cast<double>(table.algorithms());
  if (table.datasets() < 2 || table.algorithms() < 2)
    throw DomainError("friedman: need at least 2 datasets and 2 algorithms");
  double sum_sq = 0.0;
  for (double r : table.average_ranks()) sum_sq += r * r;
  FriedmanResult res;
  res.chi_square = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
  const double denom = n * (k - 1.0) - res.chi_square;
  if (std::abs(denom) < 1e-12)
    throw DegenerateError("friedman: every dataset ranks the algorithms identically; F_F is undefined");
  res.f_statistic = (n - 1.0) * res.chi_square / denom;
  return res;
}

double friedman_critical_value(double alpha, std::size_t k, std::size_t n) {
  if (k < 2 || n < 2 || !(alpha > 0.0 && alpha < 1.0))
    throw DomainError("friedman_critical_value: need k, N >= 2 and alpha in (0, 1)");
  const double df1 = static_cast<double>(k - 1);
  const double df2 = static_cast<double>((k - 1) * (n - 1));
  return boost::math::quantile(boost::math::fisher_f(df1, df2), 1.0 - alpha);
}

double nemenyi_q(double alpha, std::size_t k) {
  // Two-tailed Nemenyi critical values (studentized range / sqrt 2), k = 2..10.
  static constexpr std::array<double, 9> q05 = {1.960, 2.343, 2.569, 2.728, 2.850,
                                                2.949, 3.031, 3.102, 3.164};
  static constexpr std::array<double, 9> q10 = {1.645, 2.052, 2.291, 2.459, 2.589,
                                                2.693, 2.780, 2.855, 2.920};
  if (k < 2 || k > 10) throw DomainError("nemenyi_q: tabulated for 2 <= k <= 10 only");
  if (std::abs(alpha - 0.05) < 1e-12) return q05[k - 2];
  if (std::abs(alpha - 0.10) < 1e-12) return q10[k - 2];
  throw DomainError("nemenyi_q: alpha must be 0.05 or 0.10");
}

double nemenyi_cd(double q_alpha, std::size_t k, std::size_t n) {
  if (k < 2 || n < 1 || q_alpha < 0.0) throw DomainError("nemenyi_cd: need k >= 2, N >= 1, q >= 0");
  const double kk = static_cast<double>(k);
  return q_alpha * std::sqrt(kk * (kk + 1.0) / (6.0 * static_cast<double>(n)));
}

}  // namespace aesl
