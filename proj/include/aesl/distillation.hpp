#pragma once

// Relation-based distillation: representation similarity matrices (centered
// cosine over a batch) compared after an arctanh reparameterisation.

#include <optional>

#include "aesl/matrix.hpp"
#include "aesl/tape.hpp"

namespace aesl {

enum class RsmSource { kCurrentModel, kOldModel, kAffective };

struct Rsm {
  Matrix values;  // batch × batch
  RsmSource source = RsmSource::kCurrentModel;
};

/// Similarities are clamped into [−1 + kRsmClamp, 1 − kRsmClamp] before arctanh.
inline constexpr double kRsmClamp = 1e-6;
/// Smallest batch for which an RSM is defined (with two rows the centered
/// vectors are always opposed).
inline constexpr std::size_t kMinRsmBatch = 3;

/// Centered-cosine RSM of a batch. Throws DomainError for fewer than three
/// rows or a row equal to the batch mean.
Rsm rsm(const Matrix& features, RsmSource source = RsmSource::kCurrentModel);

/// Mean over i ≠ j of [arctanh(M^s_ij) − arctanh(M^t_ij)]².
double rkd_loss(const Rsm& student, const Rsm& teacher);

/// λ1·rkd(M_b, M_prev) + λ2·rkd(M_b, M_aff); the model term vanishes when no
/// previous model exists.
double combined_kd(const Rsm& current, const std::optional<Rsm>& previous, const Rsm& affective,
                   double lambda1, double lambda2);

/// Rescales every column to zero mean and unit variance using the statistics
/// of `reference`; constant columns are left centered at zero.
Matrix standardize_columns(const Matrix& values, const Matrix& reference);

namespace ad {

Var rsm(Var features);
/// The teacher enters as a constant: no gradient flows into it.
Var rkd_loss(Var student_rsm, const Matrix& teacher_rsm);

}  // namespace ad

}  // namespace aesl
