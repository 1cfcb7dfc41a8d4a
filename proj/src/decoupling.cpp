#include "aesl/decoupling.hpp"

#include <cmath>

#include "aesl/error.hpp"

namespace aesl {

DecouplerState make_decoupler(std::size_t input_dim, std::size_t embed_dim,
                              std::size_t latent_dim, std::size_t feature_dim, Rng& rng,
                              Activation activation) {
  auto he = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };
  DecouplerState d;
  d.instance_weight = normal_matrix(input_dim, latent_dim, he(input_dim), rng);
  d.instance_bias = Matrix(1, latent_dim);
  d.gate_weight = normal_matrix(embed_dim, latent_dim, 1.0 / std::sqrt(double(embed_dim)), rng);
  d.gate_bias = Matrix(1, latent_dim);
  d.output_weight = normal_matrix(latent_dim, feature_dim, he(latent_dim), rng);
  d.output_bias = Matrix(1, feature_dim);
  d.activation = activation;
  return d;
}

ClassifierHead make_head(std::size_t feature_dim) {
  return {Matrix(feature_dim, 0), Matrix(1, 0)};
}

ClassifierHead expand_head(const ClassifierHead& head, std::size_t new_labels, std::uint64_t seed) {
  if (new_labels == 0) return head;
  Rng rng(seed);
  Matrix fresh = normal_matrix(head.weight.rows(), new_labels, 0.01, rng);
  return {hconcat(head.weight, fresh), hconcat(head.bias, Matrix(1, new_labels))};
}

Matrix embed_instance(const Matrix& x, const DecouplerState& dec) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, dec, false);
  return ad::embed_instance(tape.constant(x), vars).value();
}

Matrix semantic_gate(const Matrix& embeddings, const DecouplerState& dec) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, dec, false);
  return ad::semantic_gate(tape.constant(embeddings), vars).value();
}

Matrix semantic_feature(const Matrix& z, std::span<const double> gate, const DecouplerState& dec) {
  if (z.cols() != dec.latent_dim() || gate.size() != dec.latent_dim())
    throw ShapeError("semantic_feature: latent " + z.shape_string() + ", gate length " +
                     std::to_string(gate.size()) + ", expected width " +
                     std::to_string(dec.latent_dim()));
  ad::Tape tape;
  const auto vars = ad::bind(tape, dec, false);
  ad::Var gated = ad::mul_row(tape.constant(z), tape.constant(Matrix::row(gate)));
  ad::Var pre = ad::add_row(ad::matmul(gated, vars.output_weight), vars.output_bias);
  return (dec.activation == Activation::kRelu ? ad::relu(pre) : pre).value();
}

Matrix predict_scores(std::span<const Matrix> features, const ClassifierHead& head) {
  if (features.size() != head.labels())
    throw ShapeError("predict_scores: " + std::to_string(features.size()) +
                     " feature blocks for a head with " + std::to_string(head.labels()) +
                     " labels");
  if (features.empty()) return {};
  const std::size_t n = features.front().rows();
  Matrix s(n, head.labels());
  for (std::size_t k = 0; k < features.size(); ++k) {
    const Matrix& o = features[k];
    if (o.rows() != n || o.cols() != head.weight.rows())
      throw ShapeError("predict_scores: feature block " + std::to_string(k) + " is " +
                       o.shape_string());
    for (std::size_t i = 0; i < n; ++i) {
      double logit = head.bias(0, k);
      for (std::size_t c = 0; c < o.cols(); ++c) logit += o(i, c) * head.weight(c, k);
      s(i, k) = 1.0 / (1.0 + std::exp(-logit));
    }
  }
  return s;
}

std::vector<int> predict_labels(std::span<const double> scores, std::span<const int> ids) {
  if (!ids.empty() && ids.size() != scores.size())
    throw ShapeError("predict_labels: ids and scores differ in length");
  std::vector<int> out;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (scores[k] > 0.5) out.push_back(ids.empty() ? static_cast<int>(k) : ids[k]);
  return out;
}

namespace ad {

DecouplerVars bind(Tape& tape, const DecouplerState& dec, bool trainable) {
  auto mk = [&](const Matrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  return {mk(dec.instance_weight), mk(dec.instance_bias), mk(dec.gate_weight),
          mk(dec.gate_bias),       mk(dec.output_weight), mk(dec.output_bias),
          dec.activation};
}

HeadVars bind(Tape& tape, const ClassifierHead& head, bool trainable) {
  auto mk = [&](const Matrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  return {mk(head.weight), mk(head.bias)};
}

Var embed_instance(Var x, const DecouplerVars& dec) {
  if (x.cols() != dec.instance_weight.rows())
    throw ShapeError("embed_instance: features have " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(dec.instance_weight.rows()));
  return relu(add_row(matmul(x, dec.instance_weight), dec.instance_bias));
}

Var semantic_gate(Var embeddings, const DecouplerVars& dec) {
  if (embeddings.cols() != dec.gate_weight.rows())
    throw ShapeError("semantic_gate: embeddings have " + std::to_string(embeddings.cols()) +
                     " columns, expected " + std::to_string(dec.gate_weight.rows()));
  return sigmoid(add_row(matmul(embeddings, dec.gate_weight), dec.gate_bias));
}

Var decoupled_logits(Var z, Var gates, const DecouplerVars& dec, const HeadVars& head) {
  const std::size_t labels = gates.rows();
  if (head.weight.cols() != labels)
    throw ShapeError("decoupled_logits: " + std::to_string(labels) + " gates for a head with " +
                     std::to_string(head.weight.cols()) + " labels");
  std::vector<Var> columns;
  columns.reserve(labels);
  for (std::size_t k = 0; k < labels; ++k) {
    Var gated = mul_row(z, select_row(gates, k));
    Var pre = add_row(matmul(gated, dec.output_weight), dec.output_bias);
    Var o = dec.activation == Activation::kRelu ? relu(pre) : pre;
    columns.push_back(add_row(matmul(o, select_col(head.weight, k)), select_col(head.bias, k)));
  }
  return hconcat(columns);
}

}  // namespace ad

}  // namespace aesl
