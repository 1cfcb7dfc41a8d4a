#include "aesl/adam.hpp"

#include <cmath>
#include <string>

#include "aesl/error.hpp"

namespace aesl {

void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  if (state.step == 0 && state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size())
    throw ShapeError("adam_step: parameter count changed since the first step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i]))
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " " +
                       params[i]->shape_string() + " vs gradient " + grads[i].shape_string());
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i].values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[j]);
    }
  }
}

}  // namespace aesl
