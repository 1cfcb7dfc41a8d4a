#pragma once

// Emotional relation graph: label co-occurrence adjacency, its block-wise
// growth across tasks, and graph-based disambiguation of teacher soft labels.

#include <cstddef>
#include <vector>

#include "json.hpp"

#include "aesl/matrix.hpp"

namespace aesl {

struct RelationGraph {
  std::vector<int> labels;  // cumulative class ids, in adjacency order
  Matrix adjacency;         // labels.size() squared

  std::size_t size() const noexcept { return labels.size(); }
};

struct CooccurrenceCounts {
  Matrix pair_counts;               // N_ij, symmetric
  std::vector<double> label_counts;  // N_j
};

/// N_ij and N_j of a (possibly soft) label matrix, one instance per row.
CooccurrenceCounts cooccurrence_counts(const Matrix& labels);

/// A_ij = N_ij / N_j for i ≠ j, zero diagonal, zero column when N_j = 0.
/// `ids` defaults to 0..K−1.
RelationGraph cooccurrence_adjacency(const Matrix& labels, std::vector<int> ids = {});

/// P_ij = exp(−‖x_i − x_j‖² / 2σ²). Throws DomainError for σ ≤ 0.
Matrix gaussian_similarity(const Matrix& features, double sigma);

/// Median of the pairwise Euclidean distances over i < j (bandwidth
/// heuristic). Returns 1 when fewer than two rows or all distances vanish.
double median_pairwise_distance(const Matrix& features);

struct PropagationState {
  Matrix similarity;   // P
  Matrix propagation;  // P̂ = P·D⁻¹ (columns sum to one)
  double balance = 0.95;  // β
};

PropagationState make_propagation_state(const Matrix& features, double sigma, double balance);

struct PropagationOptions {
  /// Stop once the a-posteriori bound β/(1−β)·‖F_t − F_{t−1}‖∞ on the distance
  /// to the fixed point drops below this.
  double tolerance = 1e-6;
  int max_iterations = 1000;
};

/// Iterates F_t = β·P̂ᵀF_{t−1} + (1−β)·F0 to its fixed point, then clamps to
/// [0, 1]. Throws ConvergenceError carrying the last residual.
Matrix propagate_labels(const PropagationState& state, const Matrix& initial,
                        const PropagationOptions& options = {});

/// Cross-task blocks of the augmented adjacency.
struct CrossBlocks {
  Matrix old_new;  // R, |old| × |new|: P(old i | new j)
  Matrix new_old;  // Q, |new| × |old|: P(new j | old i)
};

/// R_ij = Σ ŝ_i y_j / N_j and Q_ji = R_ij·N_j / Σ ŝ_i over the new task's
/// instances; zero where a denominator vanishes.
CrossBlocks complete_blocks(const Matrix& soft_old, const Matrix& labels_new);

/// [[A_old, R], [Q, B]]. The old block is copied verbatim.
RelationGraph augment(const RelationGraph& old, const CrossBlocks& cross,
                      const RelationGraph& new_block);

/// (A + Aᵀ) / 2.
RelationGraph symmetrize(const RelationGraph& g);

/// Pearson correlation of the off-diagonal entries of two graphs over the
/// same label order. Throws DomainError on zero variance.
double erg_pcc(const RelationGraph& a, const RelationGraph& oracle);

void to_json(nlohmann::json& j, const RelationGraph& g);
void from_json(const nlohmann::json& j, RelationGraph& g);

}  // namespace aesl
