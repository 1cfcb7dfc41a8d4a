#include "aesl/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "aesl/error.hpp"

namespace aesl {

namespace {

template <class Model, class Ptr>
std::vector<Ptr> collect(Model& m) {
  std::vector<Ptr> out;
  for (auto& l : m.encoder.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    out.push_back(&l.eps);
  }
  auto& d = m.decoupler;
  for (auto* p : {&d.instance_weight, &d.instance_bias, &d.gate_weight, &d.gate_bias,
                  &d.output_weight, &d.output_bias})
    out.push_back(p);
  out.push_back(&m.head.weight);
  out.push_back(&m.head.bias);
  return out;
}

}  // namespace

std::vector<Matrix*> AeslModel::parameters() { return collect<AeslModel, Matrix*>(*this); }

std::vector<const Matrix*> AeslModel::parameters() const {
  return collect<const AeslModel, const Matrix*>(*this);
}

std::vector<std::string> AeslModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
    const std::string p = "gin" + std::to_string(l) + ".";
    names.push_back(p + "weight");
    names.push_back(p + "bias");
    names.push_back(p + "eps");
  }
  for (const char* n : {"decoupler.instance_weight", "decoupler.instance_bias",
                        "decoupler.gate_weight", "decoupler.gate_bias", "decoupler.output_weight",
                        "decoupler.output_bias", "head.weight", "head.bias"})
    names.emplace_back(n);
  return names;
}

AeslModel make_model(std::size_t input_dim, const ModelConfig& config, std::uint64_t seed) {
  AeslModel m;
  m.config = config;
  m.input_dim = input_dim;
  m.seed = seed;
  Rng rng(derive_seed(seed, 0));
  std::vector<std::size_t> dims{config.node_dim};
  dims.insert(dims.end(), config.gin_hidden.begin(), config.gin_hidden.end());
  dims.push_back(config.embed_dim);
  m.encoder = make_gin_encoder(dims, rng);
  m.nodes = {config.node_dim, Matrix(0, config.node_dim)};
  m.decoupler = make_decoupler(input_dim, config.embed_dim, config.latent_dim, config.feature_dim,
                               rng, config.activation);
  m.head = make_head(config.feature_dim);
  m.graph = {{}, Matrix(0, 0)};
  return m;
}

BoundModel bind(ad::Tape& tape, const AeslModel& model, bool trainable) {
  BoundModel b;
  b.encoder = ad::bind(tape, model.encoder, trainable);
  b.decoupler = ad::bind(tape, model.decoupler, trainable);
  b.head = ad::bind(tape, model.head, trainable);
  b.nodes = tape.constant(model.nodes.values);
  b.adjacency = tape.constant(symmetrize(model.graph).adjacency);
  for (std::size_t l = 0; l < b.encoder.weight.size(); ++l) {
    b.parameters.push_back(b.encoder.weight[l]);
    b.parameters.push_back(b.encoder.bias[l]);
    b.parameters.push_back(b.encoder.eps[l]);
  }
  const auto& d = b.decoupler;
  for (ad::Var v : {d.instance_weight, d.instance_bias, d.gate_weight, d.gate_bias,
                    d.output_weight, d.output_bias})
    b.parameters.push_back(v);
  b.parameters.push_back(b.head.weight);
  b.parameters.push_back(b.head.bias);
  return b;
}

ForwardPass forward(const BoundModel& bound, ad::Var features) {
  ForwardPass f;
  f.latent = ad::embed_instance(features, bound.decoupler);
  f.embeddings = ad::gin_forward(bound.nodes, bound.adjacency, bound.encoder);
  ad::Var gates = ad::semantic_gate(f.embeddings, bound.decoupler);
  f.logits = ad::decoupled_logits(f.latent, gates, bound.decoupler, bound.head);
  f.scores = ad::sigmoid(f.logits);
  return f;
}

namespace {
constexpr std::size_t kScoreChunk = 256;
}

Matrix score(const AeslModel& model, const Matrix& features) {
  if (model.label_count() == 0) throw Error("score: model has no labels yet");
  Matrix out;
  for (std::size_t begin = 0; begin < features.rows(); begin += kScoreChunk) {
    const std::size_t count = std::min(kScoreChunk, features.rows() - begin);
    std::vector<std::size_t> rows(count);
    for (std::size_t i = 0; i < count; ++i) rows[i] = begin + i;
    ad::Tape tape;
    const BoundModel b = bind(tape, model, false);
    out = vconcat(out, forward(b, tape.constant(features.select_rows(rows))).scores.value());
  }
  return out;
}

Matrix latent_features(const AeslModel& model, const Matrix& features) {
  return embed_instance(features, model.decoupler);
}

EmotionEmbeddings label_embeddings(const AeslModel& model) {
  return gin_forward(model.nodes, symmetrize(model.graph).adjacency, model.encoder);
}

// ---- checkpoints ------------------------------------------------------------

namespace {

void write_le(std::ostream& out, const Matrix& m) {
  for (double v : m.values()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
}

void read_le(std::istream& in, Matrix& m) {
  for (double& v : m.values()) {
    char bytes[8];
    if (!in.read(bytes, 8)) throw DataError(DataErrorKind::kMalformed, "checkpoint blob truncated");
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
}

std::filesystem::path with_ext(const std::filesystem::path& prefix, const char* ext) {
  return prefix.string() + ext;
}

}  // namespace

void save_checkpoint(const AeslModel& model, const std::filesystem::path& prefix) {
  std::vector<std::pair<std::string, const Matrix*>> arrays;
  const auto names = model.parameter_names();
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) arrays.emplace_back(names[i], params[i]);
  arrays.emplace_back("nodes", &model.nodes.values);
  arrays.emplace_back("graph.adjacency", &model.graph.adjacency);

  nlohmann::json manifest;
  manifest["format"] = "aesl-checkpoint-1";
  manifest["seed"] = model.seed;
  manifest["task_index"] = model.task_index;
  manifest["input_dim"] = model.input_dim;
  manifest["labels"] = model.graph.labels;
  manifest["dims"] = {{"node_dim", model.config.node_dim},
                      {"gin_hidden", model.config.gin_hidden},
                      {"embed_dim", model.config.embed_dim},
                      {"latent_dim", model.config.latent_dim},
                      {"feature_dim", model.config.feature_dim},
                      {"activation", model.config.activation == Activation::kRelu ? "relu" : "identity"}};
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, m] : arrays)
    list.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  manifest["arrays"] = list;
  manifest["blob"] = with_ext(prefix, ".bin").filename().string();

  std::ofstream(with_ext(prefix, ".json")) << manifest.dump(2) << '\n';
  std::ofstream blob(with_ext(prefix, ".bin"), std::ios::binary);
  for (const auto& [name, m] : arrays) write_le(blob, *m);
  if (!blob) throw DataError(DataErrorKind::kMissingFile, "cannot write checkpoint blob");
}

AeslModel load_checkpoint(const std::filesystem::path& prefix) {
  std::ifstream in(with_ext(prefix, ".json"));
  if (!in)
    throw DataError(DataErrorKind::kMissingFile, "missing file: " + with_ext(prefix, ".json").string());
  const nlohmann::json m = nlohmann::json::parse(in);
  ModelConfig cfg;
  const auto& d = m.at("dims");
  cfg.node_dim = d.at("node_dim");
  cfg.gin_hidden = d.at("gin_hidden").get<std::vector<std::size_t>>();
  cfg.embed_dim = d.at("embed_dim");
  cfg.latent_dim = d.at("latent_dim");
  cfg.feature_dim = d.at("feature_dim");
  cfg.activation = d.at("activation") == "relu" ? Activation::kRelu : Activation::kIdentity;

  AeslModel model = make_model(m.at("input_dim"), cfg, m.at("seed"));
  model.task_index = m.at("task_index");
  model.graph.labels = m.at("labels").get<std::vector<int>>();
  const std::size_t k = model.graph.labels.size();
  model.nodes.values = Matrix(k, cfg.node_dim);
  model.graph.adjacency = Matrix(k, k);
  model.head = {Matrix(cfg.feature_dim, k), Matrix(1, k)};

  std::vector<Matrix*> arrays = model.parameters();
  arrays.push_back(&model.nodes.values);
  arrays.push_back(&model.graph.adjacency);
  const auto& list = m.at("arrays");
  if (list.size() != arrays.size())
    throw DataError(DataErrorKind::kMalformed, "checkpoint array count mismatch");
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (list[i].at("rows") != arrays[i]->rows() || list[i].at("cols") != arrays[i]->cols())
      throw DataError(DataErrorKind::kMalformed,
                      "checkpoint array " + list[i].at("name").get<std::string>() + " has shape " +
                          list[i].at("rows").dump() + "x" + list[i].at("cols").dump() +
                          ", expected " + arrays[i]->shape_string());
  }
  std::ifstream blob(prefix.parent_path() / m.at("blob").get<std::string>(), std::ios::binary);
  if (!blob) throw DataError(DataErrorKind::kMissingFile, "missing checkpoint blob");
  for (Matrix* a : arrays) read_le(blob, *a);
  return model;
}

}  // namespace aesl
