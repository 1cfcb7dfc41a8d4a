#include "aesl/distillation.hpp"

#include <algorithm>
#include <cmath>

#include "aesl/error.hpp"

namespace aesl {

namespace {

Matrix off_diagonal_mask(std::size_t n) {
  Matrix m(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 0.0;
  return m;
}

}  // namespace

Rsm rsm(const Matrix& features, RsmSource source) {
  ad::Tape tape;
  return {ad::rsm(tape.constant(features)).value(), source};
}

double rkd_loss(const Rsm& student, const Rsm& teacher) {
  ad::Tape tape;
  return ad::rkd_loss(tape.constant(student.values), teacher.values).scalar();
}

double combined_kd(const Rsm& current, const std::optional<Rsm>& previous, const Rsm& affective,
                   double lambda1, double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw DomainError("combined_kd: negative weight");
  double total = 0.0;
  if (previous && lambda1 != 0.0) total += lambda1 * rkd_loss(current, *previous);
  if (lambda2 != 0.0) total += lambda2 * rkd_loss(current, affective);
  return total;
}

Matrix standardize_columns(const Matrix& values, const Matrix& reference) {
  if (values.cols() != reference.cols())
    throw ShapeError("standardize_columns: " + values.shape_string() + " vs reference " +
                     reference.shape_string());
  Matrix out = values;
  const double n = static_cast<double>(reference.rows());
  for (std::size_t c = 0; c < reference.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < reference.rows(); ++r) mean += reference(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < reference.rows(); ++r)
      var += (reference(r, c) - mean) * (reference(r, c) - mean);
    var /= n;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t r = 0; r < out.rows(); ++r) out(r, c) = (out(r, c) - mean) / sd;
  }
  return out;
}

namespace ad {

Var rsm(Var features) {
  if (features.rows() < kMinRsmBatch)
    throw DomainError("rsm: batch of " + std::to_string(features.rows()) +
                      " rows, need at least " + std::to_string(kMinRsmBatch));
  return centered_cosine(features, "rsm: batch");
}

Var rkd_loss(Var student_rsm, const Matrix& teacher_rsm) {
  const Matrix& s = student_rsm.value();
  if (!s.same_shape(teacher_rsm) || s.rows() != s.cols())
    throw ShapeError("rkd_loss: student " + s.shape_string() + " vs teacher " +
                     teacher_rsm.shape_string());
  // `s` points into the tape, which the pushes below may reallocate.
  const std::size_t n = s.rows();
  const double lo = -1.0 + kRsmClamp;
  const double hi = 1.0 - kRsmClamp;
  Matrix teacher = teacher_rsm;
  for (double& v : teacher.values()) v = std::atanh(std::clamp(v, lo, hi));
  Var student = arctanh(clamp(student_rsm, lo, hi));
  Var diff = sub(student, student_rsm.tape->constant(std::move(teacher)));
  return masked_mean(square(diff), off_diagonal_mask(n));
}

}  // namespace ad

}  // namespace aesl
