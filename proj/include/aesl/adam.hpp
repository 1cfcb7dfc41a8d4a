#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aesl/matrix.hpp"

namespace aesl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.9999;
  double eps = 1e-8;
  /// Decoupled (AdamW-style): p ← p − lr·weight_decay·p, independent of the
  /// gradient moments.
  double weight_decay = 0.0;
};

/// Adam optimizer state. Moment buffers are created on the first step and
/// matched to the parameter list from then on.
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads);

}  // namespace aesl
