#pragma once

// Semantic-guided feature decoupling: a shared latent z per instance, a
// per-label sigmoid gate computed from the label embedding, a shared output
// map producing label-specific features o_k, and an expandable head scoring
// each o_k with its own classifier.

#include <cstdint>
#include <span>
#include <vector>

#include "aesl/matrix.hpp"
#include "aesl/rng.hpp"
#include "aesl/tape.hpp"

namespace aesl {

enum class Activation { kRelu, kIdentity };

struct DecouplerState {
  Matrix instance_weight;  // W_x, D × d_z
  Matrix instance_bias;    // b_x, 1 × d_z
  Matrix gate_weight;      // W_e, d_L × d_z
  Matrix gate_bias;        // b_e, 1 × d_z
  Matrix output_weight;    // W_o, d_z × d
  Matrix output_bias;      // b_o, 1 × d
  Activation activation = Activation::kRelu;  // ζ

  std::size_t input_dim() const { return instance_weight.rows(); }
  std::size_t latent_dim() const { return instance_weight.cols(); }
  std::size_t embed_dim() const { return gate_weight.rows(); }
  std::size_t feature_dim() const { return output_weight.cols(); }
};

DecouplerState make_decoupler(std::size_t input_dim, std::size_t embed_dim,
                              std::size_t latent_dim, std::size_t feature_dim, Rng& rng,
                              Activation activation = Activation::kRelu);

struct ClassifierHead {
  Matrix weight;  // d × |labels|, column k is w_k
  Matrix bias;    // 1 × |labels|

  std::size_t labels() const noexcept { return weight.cols(); }
};

/// Head with no label columns yet.
ClassifierHead make_head(std::size_t feature_dim);

/// Appends `new_labels` columns drawn from N(0, 0.01²) with zero biases.
ClassifierHead expand_head(const ClassifierHead& head, std::size_t new_labels, std::uint64_t seed);

/// z = ReLU(x·W_x + b_x) for each row of x.
Matrix embed_instance(const Matrix& x, const DecouplerState& dec);
/// α_k = sigmoid(e_k·W_e + b_e) for each row e_k.
Matrix semantic_gate(const Matrix& embeddings, const DecouplerState& dec);
/// o_k = ζ((z ⊙ α_k)·W_o + b_o) for each row of z and one gate row α_k.
Matrix semantic_feature(const Matrix& z, std::span<const double> gate, const DecouplerState& dec);
/// s_k = sigmoid(o_k·w_k + b_k); features[k] holds o_k for every instance.
/// Returns instances × labels.
Matrix predict_scores(std::span<const Matrix> features, const ClassifierHead& head);

/// Ids whose score is strictly above 0.5. `ids` defaults to positions.
std::vector<int> predict_labels(std::span<const double> scores, std::span<const int> ids = {});

namespace ad {

struct DecouplerVars {
  Var instance_weight, instance_bias, gate_weight, gate_bias, output_weight, output_bias;
  Activation activation = Activation::kRelu;
};

struct HeadVars {
  Var weight, bias;
};

DecouplerVars bind(Tape& tape, const DecouplerState& dec, bool trainable);
HeadVars bind(Tape& tape, const ClassifierHead& head, bool trainable);

Var embed_instance(Var x, const DecouplerVars& dec);
Var semantic_gate(Var embeddings, const DecouplerVars& dec);
/// Per-label logits w_kᵀo_k + b_k, instances × labels.
Var decoupled_logits(Var z, Var gates, const DecouplerVars& dec, const HeadVars& head);

}  // namespace ad

}  // namespace aesl
