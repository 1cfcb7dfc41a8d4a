#pragma once

// Label semantics: a GIN graph autoencoder over the relation graph. Node
// features are persistent Gaussian draws; the decoder is the centered-cosine
// similarity of the embeddings, fitted to Â = A + I.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "aesl/matrix.hpp"
#include "aesl/rng.hpp"
#include "aesl/tape.hpp"

namespace aesl {

/// One GIN layer: f[(1+ε)H + A·H] with f an affine map (ReLU on all but the
/// last layer).
struct GinLayer {
  Matrix weight;  // d_in × d_out
  Matrix bias;    // 1 × d_out
  Matrix eps;     // 1 × 1, trainable

  double epsilon() const { return eps(0, 0); }
};

struct GinEncoderState {
  std::vector<GinLayer> layers;

  /// d_0, d_1, …, d_L
  std::vector<std::size_t> dims() const;
};

/// Encoder with He-normal weights, zero biases and ε = 0. `dims` lists d_0..d_L.
GinEncoderState make_gin_encoder(std::span<const std::size_t> dims, Rng& rng);

struct NodeFeatures {
  std::size_t dim = 0;
  Matrix values;  // one row per label, dim columns

  std::size_t count() const noexcept { return values.rows(); }
};

/// Appends `new_count` rows of N(0, 1) draws from a generator seeded with
/// `seed`; existing rows are copied untouched.
NodeFeatures grow_nodes(const NodeFeatures& nodes, std::size_t new_count, std::uint64_t seed);

struct EmotionEmbeddings {
  Matrix values;  // |labels| × d_L

  /// Arithmetic mean of the rows, computed on every call.
  Matrix mean() const;
};

EmotionEmbeddings gin_forward(const NodeFeatures& nodes, const Matrix& adjacency,
                              const GinEncoderState& encoder);

/// Mean over all (i, j) of [centered-cosine(e_i, e_j) − Â_ij]².
double reconstruction_loss(const EmotionEmbeddings& embeddings, const Matrix& a_hat);

/// A + I.
Matrix with_self_loops(const Matrix& adjacency);

/// CSV with a header row, one line per label: id, e_0, …, e_{d−1}.
void write_embeddings_csv(std::ostream& out, std::span<const int> labels,
                          const EmotionEmbeddings& embeddings);

namespace ad {

struct GinVars {
  std::vector<Var> weight;
  std::vector<Var> bias;
  std::vector<Var> eps;
};

GinVars bind(Tape& tape, const GinEncoderState& encoder, bool trainable);
Var gin_forward(Var nodes, Var adjacency, const GinVars& encoder);
Var reconstruction_loss(Var embeddings, const Matrix& a_hat);

}  // namespace ad

}  // namespace aesl
