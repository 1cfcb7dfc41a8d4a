#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aesl/decoupling.hpp"
#include "aesl/relation_graph.hpp"
#include "aesl/semantics.hpp"
#include "aesl/tape.hpp"

namespace aesl {

struct ModelConfig {
  std::size_t node_dim = 32;                 // d_0, task-agnostic
  std::vector<std::size_t> gin_hidden = {64};
  std::size_t embed_dim = 64;                // d_L
  std::size_t latent_dim = 64;               // d_z
  std::size_t feature_dim = 32;              // d
  Activation activation = Activation::kRelu;  // ζ
};

/// Everything a run learns or accumulates: Φ = {θ, φ, W} plus the node
/// features and the relation graph.
struct AeslModel {
  ModelConfig config;
  std::size_t input_dim = 0;
  std::uint64_t seed = 0;
  GinEncoderState encoder;
  NodeFeatures nodes;
  DecouplerState decoupler;
  ClassifierHead head;
  RelationGraph graph;
  int task_index = 0;  // completed tasks

  std::size_t label_count() const noexcept { return head.labels(); }

  /// Trainable matrices in declared order: per GIN layer (weight, bias, eps),
  /// then W_x, b_x, W_e, b_e, W_o, b_o, then head weight and bias.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

AeslModel make_model(std::size_t input_dim, const ModelConfig& config, std::uint64_t seed);

/// Model parameters placed on a tape.
struct BoundModel {
  ad::GinVars encoder;
  ad::DecouplerVars decoupler;
  ad::HeadVars head;
  ad::Var nodes;
  ad::Var adjacency;  // symmetrised graph
  std::vector<ad::Var> parameters;  // same order as AeslModel::parameters()
};

BoundModel bind(ad::Tape& tape, const AeslModel& model, bool trainable);

struct ForwardPass {
  ad::Var latent;      // z, instances × d_z
  ad::Var embeddings;  // E, labels × d_L
  ad::Var logits;      // instances × labels
  ad::Var scores;      // sigmoid(logits)
};

ForwardPass forward(const BoundModel& bound, ad::Var features);

/// Scores over all current labels, instances × labels. Instances are
/// processed in chunks on a fresh tape each.
Matrix score(const AeslModel& model, const Matrix& features);
/// Latent z for every instance.
Matrix latent_features(const AeslModel& model, const Matrix& features);
/// Label embeddings for the current graph.
EmotionEmbeddings label_embeddings(const AeslModel& model);

/// Writes `<prefix>.json` (manifest) and `<prefix>.bin` (little-endian
/// float64 arrays in manifest order). Loading reproduces the model bit for bit.
void save_checkpoint(const AeslModel& model, const std::filesystem::path& prefix);
AeslModel load_checkpoint(const std::filesystem::path& prefix);

}  // namespace aesl
