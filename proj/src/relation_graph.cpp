#include "aesl/relation_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aesl/error.hpp"
#include "aesl/kernels.hpp"

namespace aesl {

CooccurrenceCounts cooccurrence_counts(const Matrix& labels) {
  const std::size_t k = labels.cols();
  CooccurrenceCounts out{Matrix(k, k), std::vector<double>(k, 0.0)};
  // N = YᵀY; the diagonal of a hard label matrix is N_j.
  kernels::gemm_tn(labels.values().data(), labels.values().data(), out.pair_counts.values().data(),
                   {k, labels.rows(), k});
  for (std::size_t r = 0; r < labels.rows(); ++r)
    for (std::size_t j = 0; j < k; ++j) out.label_counts[j] += labels(r, j);
  return out;
}

RelationGraph cooccurrence_adjacency(const Matrix& labels, std::vector<int> ids) {
  const std::size_t k = labels.cols();
  if (ids.empty()) {
    ids.resize(k);
    std::iota(ids.begin(), ids.end(), 0);
  }
  if (ids.size() != k)
    throw ShapeError("cooccurrence_adjacency: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(k) + " label columns");
  const CooccurrenceCounts counts = cooccurrence_counts(labels);
  Matrix a(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j || counts.label_counts[j] == 0.0) continue;
      a(i, j) = counts.pair_counts(i, j) / counts.label_counts[j];
    }
  }
  return {std::move(ids), std::move(a)};
}

Matrix gaussian_similarity(const Matrix& features, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("gaussian_similarity: sigma must be positive, got " + std::to_string(sigma));
  const std::size_t n = features.rows();
  Matrix p(n, n);
  kernels::pairwise_sq_dist(features.values().data(), p.values().data(), n, features.cols());
  const double denom = 2.0 * sigma * sigma;
  for (double& v : p.values()) v = std::exp(-v / denom);
  return p;
}

double median_pairwise_distance(const Matrix& features) {
  const std::size_t n = features.rows();
  if (n < 2) return 1.0;
  Matrix d(n, n);
  kernels::pairwise_sq_dist(features.values().data(), d.values().data(), n, features.cols());
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.push_back(std::sqrt(d(i, j)));
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double med = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med > 0.0 ? med : 1.0;
}

PropagationState make_propagation_state(const Matrix& features, double sigma, double balance) {
  if (!(balance >= 0.0 && balance <= 1.0))
    throw DomainError("propagation: balance must lie in [0, 1], got " + std::to_string(balance));
  PropagationState st;
  st.similarity = gaussian_similarity(features, sigma);
  st.balance = balance;
  const std::size_t n = features.rows();
  st.propagation = st.similarity;
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += st.similarity(i, j);
    for (std::size_t i = 0; i < n; ++i) st.propagation(i, j) /= col;
  }
  return st;
}

Matrix propagate_labels(const PropagationState& state, const Matrix& initial,
                        const PropagationOptions& options) {
  const std::size_t n = state.propagation.rows();
  if (initial.rows() != n)
    throw ShapeError("propagate_labels: confidence " + initial.shape_string() + " vs " +
                     std::to_string(n) + " instances");
  const double beta = state.balance;
  Matrix f = initial;
  if (beta == 0.0 || initial.cols() == 0) return f;

  Matrix next(n, initial.cols());
  // With ‖P̂ᵀ‖∞ = 1 the update is a β-contraction, which yields this bound.
  const double bound_factor = beta < 1.0 ? beta / (1.0 - beta) : 1.0;
  double residual = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    kernels::gemm_tn(state.propagation.values().data(), f.values().data(), next.values().data(),
                     {n, n, initial.cols()});
    residual = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      double& v = next.values()[i];
      v = beta * v + (1.0 - beta) * initial.values()[i];
      residual = std::max(residual, std::abs(v - f.values()[i]));
    }
    std::swap(f, next);
    if (bound_factor * residual < options.tolerance) {
      for (double& v : f.values()) v = std::clamp(v, 0.0, 1.0);
      return f;
    }
  }
  throw ConvergenceError("propagate_labels: no convergence after " +
                             std::to_string(options.max_iterations) +
                             " iterations (residual " + std::to_string(residual) + ")",
                         residual);
}

CrossBlocks complete_blocks(const Matrix& soft_old, const Matrix& labels_new) {
  if (soft_old.rows() != labels_new.rows())
    throw ShapeError("complete_blocks: soft labels " + soft_old.shape_string() + " vs labels " +
                     labels_new.shape_string());
  const std::size_t n_old = soft_old.cols();
  const std::size_t n_new = labels_new.cols();
  Matrix joint(n_old, n_new);  // Σ_x ŝ_i y_j
  kernels::gemm_tn(soft_old.values().data(), labels_new.values().data(), joint.values().data(),
                   {n_old, soft_old.rows(), n_new});
  std::vector<double> new_counts(n_new, 0.0);
  std::vector<double> soft_mass(n_old, 0.0);
  for (std::size_t r = 0; r < soft_old.rows(); ++r) {
    for (std::size_t j = 0; j < n_new; ++j) new_counts[j] += labels_new(r, j);
    for (std::size_t i = 0; i < n_old; ++i) soft_mass[i] += soft_old(r, i);
  }
  CrossBlocks out{Matrix(n_old, n_new), Matrix(n_new, n_old)};
  for (std::size_t i = 0; i < n_old; ++i) {
    for (std::size_t j = 0; j < n_new; ++j) {
      if (new_counts[j] > 0.0) out.old_new(i, j) = joint(i, j) / new_counts[j];
      if (soft_mass[i] > 0.0) out.new_old(j, i) = out.old_new(i, j) * new_counts[j] / soft_mass[i];
    }
  }
  return out;
}

RelationGraph augment(const RelationGraph& old, const CrossBlocks& cross,
                      const RelationGraph& new_block) {
  const std::size_t o = old.size();
  const std::size_t m = new_block.size();
  if (o == 0) return new_block;
  if (old.adjacency.rows() != o || old.adjacency.cols() != o)
    throw ShapeError("augment: old adjacency " + old.adjacency.shape_string() + " for " +
                     std::to_string(o) + " labels");
  if (cross.old_new.rows() != o || cross.old_new.cols() != m || cross.new_old.rows() != m ||
      cross.new_old.cols() != o || new_block.adjacency.rows() != m ||
      new_block.adjacency.cols() != m)
    throw ShapeError("augment: blocks R " + cross.old_new.shape_string() + ", Q " +
                     cross.new_old.shape_string() + ", B " + new_block.adjacency.shape_string() +
                     " inconsistent with " + std::to_string(o) + " old and " + std::to_string(m) +
                     " new labels");
  RelationGraph g;
  g.labels = old.labels;
  g.labels.insert(g.labels.end(), new_block.labels.begin(), new_block.labels.end());
  g.adjacency = Matrix(o + m, o + m);
  for (std::size_t i = 0; i < o; ++i) {
    for (std::size_t j = 0; j < o; ++j) g.adjacency(i, j) = old.adjacency(i, j);
    for (std::size_t j = 0; j < m; ++j) g.adjacency(i, o + j) = cross.old_new(i, j);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < o; ++j) g.adjacency(o + i, j) = cross.new_old(i, j);
    for (std::size_t j = 0; j < m; ++j) g.adjacency(o + i, o + j) = new_block.adjacency(i, j);
  }
  return g;
}

RelationGraph symmetrize(const RelationGraph& g) {
  const Matrix& a = g.adjacency;
  if (a.rows() != a.cols()) throw ShapeError("symmetrize: adjacency " + a.shape_string());
  RelationGraph out{g.labels, Matrix(a.rows(), a.cols())};
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.adjacency(i, j) = 0.5 * (a(i, j) + a(j, i));
  return out;
}

double erg_pcc(const RelationGraph& a, const RelationGraph& oracle) {
  if (a.labels != oracle.labels)
    throw ShapeError("erg_pcc: graphs are over different label sets");
  const std::size_t k = a.size();
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      x.push_back(a.adjacency(i, j));
      y.push_back(oracle.adjacency(i, j));
    }
  }
  if (x.size() < 2) throw DomainError("erg_pcc: fewer than two off-diagonal entries");
  const double nx = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nx;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nx;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("erg_pcc: zero variance in a graph");
  return sxy / std::sqrt(sxx * syy);
}

void to_json(nlohmann::json& j, const RelationGraph& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < g.adjacency.rows(); ++r) {
    auto span = g.adjacency.row_span(r);
    rows.push_back(std::vector<double>(span.begin(), span.end()));
  }
  j = nlohmann::json{{"labels", g.labels}, {"adjacency", rows}};
}

void from_json(const nlohmann::json& j, RelationGraph& g) {
  g.labels = j.at("labels").get<std::vector<int>>();
  const auto& rows = j.at("adjacency");
  const std::size_t k = g.labels.size();
  if (rows.size() != k) throw ShapeError("RelationGraph json: adjacency row count != labels");
  g.adjacency = Matrix(k, k);
  for (std::size_t r = 0; r < k; ++r) {
    const auto vals = rows[r].get<std::vector<double>>();
    if (vals.size() != k) throw ShapeError("RelationGraph json: ragged adjacency");
    std::copy(vals.begin(), vals.end(), g.adjacency.row_span(r).begin());
  }
}

}  // namespace aesl
