#include "aesl/semantics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "aesl/error.hpp"

namespace aesl {

std::vector<std::size_t> GinEncoderState::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().weight.rows());
  for (const auto& l : layers) d.push_back(l.weight.cols());
  return d;
}

GinEncoderState make_gin_encoder(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("make_gin_encoder: need at least d_0 and d_1");
  GinEncoderState enc;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(dims[l - 1]));
    enc.layers.push_back({normal_matrix(dims[l - 1], dims[l], stddev, rng), Matrix(1, dims[l]),
                          Matrix(1, 1, 0.0)});
  }
  return enc;
}

NodeFeatures grow_nodes(const NodeFeatures& nodes, std::size_t new_count, std::uint64_t seed) {
  if (new_count == 0) return nodes;
  Rng rng(seed);
  Matrix fresh = normal_matrix(new_count, nodes.dim, 1.0, rng);
  return {nodes.dim, vconcat(nodes.values, fresh)};
}

Matrix EmotionEmbeddings::mean() const {
  Matrix m(1, values.cols());
  if (values.rows() == 0) return m;
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c) m(0, c) += values(r, c);
  for (double& v : m.values()) v /= static_cast<double>(values.rows());
  return m;
}

Matrix with_self_loops(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols())
    throw ShapeError("with_self_loops: adjacency " + adjacency.shape_string());
  return adjacency + Matrix::identity(adjacency.rows());
}

EmotionEmbeddings gin_forward(const NodeFeatures& nodes, const Matrix& adjacency,
                              const GinEncoderState& encoder) {
  ad::Tape tape;
  const ad::GinVars vars = ad::bind(tape, encoder, false);
  ad::Var out = ad::gin_forward(tape.constant(nodes.values), tape.constant(adjacency), vars);
  return {out.value()};
}

double reconstruction_loss(const EmotionEmbeddings& embeddings, const Matrix& a_hat) {
  ad::Tape tape;
  return ad::reconstruction_loss(tape.constant(embeddings.values), a_hat).scalar();
}

void write_embeddings_csv(std::ostream& out, std::span<const int> labels,
                          const EmotionEmbeddings& embeddings) {
  const Matrix& e = embeddings.values;
  if (labels.size() != e.rows())
    throw ShapeError("write_embeddings_csv: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(e.rows()) + " embedding rows");
  out << "label";
  for (std::size_t c = 0; c < e.cols(); ++c) out << ",e" << c;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < e.rows(); ++r) {
    out << labels[r];
    for (std::size_t c = 0; c < e.cols(); ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, e(r, c));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

namespace ad {

GinVars bind(Tape& tape, const GinEncoderState& encoder, bool trainable) {
  GinVars v;
  for (const auto& l : encoder.layers) {
    v.weight.push_back(trainable ? tape.variable(l.weight) : tape.constant(l.weight));
    v.bias.push_back(trainable ? tape.variable(l.bias) : tape.constant(l.bias));
    v.eps.push_back(trainable ? tape.variable(l.eps) : tape.constant(l.eps));
  }
  return v;
}

Var gin_forward(Var nodes, Var adjacency, const GinVars& encoder) {
  const Matrix& a = adjacency.value();
  if (a.rows() != a.cols() || a.rows() != nodes.rows())
    throw ShapeError("gin_forward: adjacency " + a.shape_string() + " for node features " +
                     nodes.value().shape_string());
  Var h = nodes;
  const std::size_t layers = encoder.weight.size();
  for (std::size_t l = 0; l < layers; ++l) {
    if (h.cols() != encoder.weight[l].rows())
      throw ShapeError("gin_forward: layer " + std::to_string(l) + " expects width " +
                       std::to_string(encoder.weight[l].rows()) + ", got " +
                       std::to_string(h.cols()));
    // (1+ε)H + AH = H + εH + AH
    Var mixed = add(add(h, mul_scalar(h, encoder.eps[l])), matmul(adjacency, h));
    Var affine = add_row(matmul(mixed, encoder.weight[l]), encoder.bias[l]);
    h = (l + 1 < layers) ? relu(affine) : affine;
  }
  return h;
}

Var reconstruction_loss(Var embeddings, const Matrix& a_hat) {
  const std::size_t k = embeddings.rows();
  if (a_hat.rows() != k || a_hat.cols() != k)
    throw ShapeError("reconstruction_loss: Â " + a_hat.shape_string() + " for " +
                     std::to_string(k) + " embeddings");
  Var cos = centered_cosine(embeddings, "reconstruction_loss: embedding");
  Var diff = sub(cos, embeddings.tape->constant(a_hat));
  return masked_mean(square(diff), Matrix(k, k, 1.0));
}

}  // namespace ad

}  // namespace aesl
