#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "aesl/error.hpp"
#include "aesl/evaluation.hpp"

using aesl::Matrix;

TEST_CASE("average_precision hand cases") {
  const std::vector<double> s{0.9, 0.8, 0.7};
  CHECK(aesl::average_precision(s, std::vector<double>{1, 0, 1}) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(aesl::average_precision(s, std::vector<double>{0, 0, 1}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(aesl::average_precision(s, std::vector<double>{1, 1, 0}) == 1.0);
  CHECK_THROWS_AS(aesl::average_precision(s, std::vector<double>{0, 0, 0}), aesl::DomainError);
}

TEST_CASE("average_precision breaks ties by index") {
  const std::vector<double> s{0.5, 0.5, 0.5};
  CHECK(aesl::average_precision(s, std::vector<double>{1, 0, 0}) == 1.0);
  CHECK(aesl::average_precision(s, std::vector<double>{0, 0, 1}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("F1 hand cases") {
  const Matrix y{{1, 0}, {0, 1}, {1, 1}};
  CHECK(aesl::macro_f1(Matrix(3, 2, 0.4), y) == 0.0);
  CHECK(aesl::micro_f1(Matrix(3, 2, 0.4), y) == 0.0);
  CHECK(aesl::macro_f1(y, y) == 1.0);
  CHECK(aesl::micro_f1(y, y) == 1.0);

  // Class 0: TP, FP. Class 1: FN. Pooled (1, 1, 1).
  const Matrix s{{0.9, 0.1}, {0.8, 0.2}};
  const Matrix t{{1, 0}, {0, 1}};
  CHECK(aesl::micro_f1(s, t) == doctest::Approx(0.5));
  CHECK(aesl::macro_f1(s, t) == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0));
}

TEST_CASE("mean_ap skips classes without positives") {
  const Matrix s{{0.9, 0.2}, {0.1, 0.8}};
  const Matrix y{{1, 0}, {0, 0}};
  CHECK(aesl::mean_ap(s, y) == 1.0);
  CHECK_THROWS_AS(aesl::mean_ap(s, Matrix(2, 2)), aesl::DomainError);
}

TEST_CASE("metrics equal brute-force oracles") {
  aesl::Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix s = testing::random_matrix(10, 6, rng, 0.0, 1.0);
    Matrix y = testing::random_binary(10, 6, rng, 0.4);
    y(trial % 10, 0) = 1.0;  // at least one positive class
    CHECK(aesl::mean_ap(s, y) == doctest::Approx(testing::brute_map(s, y)).epsilon(1e-10));
    CHECK(aesl::macro_f1(s, y) == doctest::Approx(testing::brute_macro_f1(s, y)).epsilon(1e-10));
    CHECK(aesl::micro_f1(s, y) == doctest::Approx(testing::brute_micro_f1(s, y)).epsilon(1e-10));
  }
}

TEST_CASE("AP is invariant under strictly monotone transforms") {
  aesl::Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix s = testing::random_matrix(12, 1, rng, 0.0, 1.0);
    Matrix y = testing::random_binary(12, 1, rng);
    y(0, 0) = 1.0;
    std::vector<double> a(s.values().begin(), s.values().end());
    std::vector<double> b;
    for (double v : a) b.push_back(std::exp(3.0 * v) - 7.0);
    const std::vector<double> rel(y.values().begin(), y.values().end());
    CHECK(aesl::average_precision(a, rel) == aesl::average_precision(b, rel));
  }
}

TEST_CASE("micro equals macro when confusion counts agree") {
  // Both classes: one TP, one FP, one FN.
  const Matrix s{{0.9, 0.9}, {0.8, 0.8}, {0.1, 0.1}};
  const Matrix y{{1, 1}, {0, 0}, {1, 1}};
  CHECK(aesl::micro_f1(s, y) == doctest::Approx(aesl::macro_f1(s, y)));
}

TEST_CASE("evaluate_step and report bookkeeping") {
  const Matrix y{{1, 0}, {0, 1}};
  const auto step = aesl::evaluate_step(2, y, y);
  CHECK(step.task == 2);
  CHECK(step.seen_classes == 2);
  CHECK(step.map == 1.0);
  aesl::MetricsReport report;
  report.steps = {step, step};
  report.steps[0].map = 0.5;
  CHECK(report.average_accuracy() == doctest::Approx(0.75));
  CHECK(report.last().map == 1.0);
}

TEST_CASE("rank_table averages ties") {
  const auto t = aesl::rank_table({{0.9, 0.5, 0.5}, {0.1, 0.2, 0.3}});
  CHECK(t.ranks[0] == std::vector<double>{1.0, 2.5, 2.5});
  CHECK(t.ranks[1] == std::vector<double>{3.0, 2.0, 1.0});
  const auto low = aesl::rank_table({{0.9, 0.5, 0.1}}, false);
  CHECK(low.ranks[0] == std::vector<double>{3.0, 2.0, 1.0});
  const auto avg = t.average_ranks();
  CHECK(avg == std::vector<double>{2.0, 2.25, 1.75});
}

TEST_CASE("friedman hand cases") {
  aesl::RankTable t;
  t.ranks = {{1, 2, 3}, {2, 1, 3}};
  const auto r = aesl::friedman(t);
  CHECK(r.chi_square == doctest::Approx(3.0));
  CHECK(r.f_statistic == doctest::Approx(3.0));

  const auto tied = aesl::friedman(aesl::rank_table({{1, 1, 1}, {2, 2, 2}}));
  CHECK(tied.chi_square == 0.0);
  CHECK(tied.f_statistic == 0.0);

  // Perfect agreement: N(k−1) − χ²_F = 0.
  aesl::RankTable perfect;
  perfect.ranks = {{1, 2}, {1, 2}};
  CHECK_THROWS_AS(aesl::friedman(perfect), aesl::DegenerateError);
}

TEST_CASE("friedman critical value and Nemenyi") {
  CHECK(aesl::friedman_critical_value(0.05, 9, 7) == doctest::Approx(2.138).epsilon(1e-3));
  CHECK(aesl::nemenyi_q(0.05, 9) == 3.102);
  CHECK(aesl::nemenyi_cd(3.102, 9, 7) == doctest::Approx(4.540).epsilon(1e-3 / 4.540));
  CHECK(aesl::nemenyi_cd(0.0, 9, 7) == 0.0);
  CHECK(aesl::nemenyi_cd(1.0, 2, 6) == doctest::Approx(std::sqrt(6.0 / 36.0)));
}
