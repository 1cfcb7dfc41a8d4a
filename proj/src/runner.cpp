#include "aesl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "aesl/distillation.hpp"
#include "aesl/error.hpp"
#include "aesl/evaluation.hpp"

namespace aesl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr Method kAllMethods[] = {Method::kAesl, Method::kFinetune, Method::kLwf,
                                  Method::kEr,   Method::kRs,       Method::kUpperBound};

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kAesl: return "aesl";
    case Method::kFinetune: return "finetune";
    case Method::kLwf: return "lwf";
    case Method::kEr: return "er";
    case Method::kRs: return "rs";
    case Method::kUpperBound: return "upper";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods)
    if (name == method_name(m)) return m;
  throw ConfigError({"methods: unknown method \"" + name +
                     "\" (expected aesl, finetune, lwf, er, rs or upper)"});
}

// ---- config parsing -------------------------------------------------------------

namespace {

// Collects field-level problems instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  template <class T>
  void read(const json& obj, const char* key, T& out, const std::string& path) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      errors.push_back(path + key + ": wrong type (" + obj.at(key).dump() + ")");
    }
  }

  void positive(std::size_t v, const std::string& field) {
    if (v == 0) errors.push_back(field + ": must be positive");
  }
  void non_negative(double v, const std::string& field) {
    if (!std::isfinite(v) || v < 0.0) errors.push_back(field + ": must be finite and >= 0");
  }

  void unknown_keys(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    for (const auto& [k, v] : obj.items())
      if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end())
        errors.push_back(path + k + ": unknown field");
  }
};

void read_generator(Reader& r, const json& g, GeneratorConfig& cfg) {
  const std::string p = "dataset.generate.";
  r.unknown_keys(g, {"seed", "n_train", "n_test", "labels", "affective_dims", "feature_dims",
                     "label_cardinality", "prototype_scale", "distance_slope", "label_signal",
                     "latent_signal", "feature_noise", "affective_noise", "threshold"}, p);
  r.read(g, "seed", cfg.seed, p);
  r.read(g, "n_train", cfg.n_train, p);
  r.read(g, "n_test", cfg.n_test, p);
  r.read(g, "labels", cfg.labels, p);
  r.read(g, "affective_dims", cfg.affective_dims, p);
  r.read(g, "feature_dims", cfg.feature_dims, p);
  r.read(g, "label_cardinality", cfg.label_cardinality, p);
  r.read(g, "prototype_scale", cfg.prototype_scale, p);
  r.read(g, "distance_slope", cfg.distance_slope, p);
  r.read(g, "label_signal", cfg.label_signal, p);
  r.read(g, "latent_signal", cfg.latent_signal, p);
  r.read(g, "feature_noise", cfg.feature_noise, p);
  r.read(g, "affective_noise", cfg.affective_noise, p);
  r.read(g, "threshold", cfg.threshold, p);
}

json generator_json(const GeneratorConfig& g) {
  return {{"seed", g.seed},
          {"n_train", g.n_train},
          {"n_test", g.n_test},
          {"labels", g.labels},
          {"affective_dims", g.affective_dims},
          {"feature_dims", g.feature_dims},
          {"label_cardinality", g.label_cardinality},
          {"prototype_scale", g.prototype_scale},
          {"distance_slope", g.distance_slope},
          {"label_signal", g.label_signal},
          {"latent_signal", g.latent_signal},
          {"feature_noise", g.feature_noise},
          {"affective_noise", g.affective_noise},
          {"threshold", g.threshold}};
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  RunConfig c;
  Reader r;
  if (!j.is_object()) throw ConfigError({"config: top level must be an object"});
  r.unknown_keys(j, {"name", "dataset", "protocol", "membership", "methods", "seeds", "model",
                     "train", "replay", "output", "jobs"}, "");
  r.read(j, "name", c.name, "");

  if (!j.contains("dataset")) {
    r.errors.push_back("dataset: required (\"generate\" or \"manifest\")");
  } else {
    const json& d = j.at("dataset");
    const bool gen = d.is_object() && d.contains("generate");
    const bool man = d.is_object() && d.contains("manifest");
    if (gen == man) {
      r.errors.push_back("dataset: exactly one of \"generate\" or \"manifest\" is required");
    } else if (gen) {
      c.generate = GeneratorConfig{};
      if (d.at("generate").is_object())
        read_generator(r, d.at("generate"), *c.generate);
      else
        r.errors.push_back("dataset.generate: must be an object");
    } else {
      std::string path;
      r.read(d, "manifest", path, "dataset.");
      fs::path p(path);
      c.manifest = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
  }

  if (!j.contains("protocol")) {
    r.errors.push_back("protocol: required ({\"base\": b, \"increment\": i})");
  } else {
    const json& p = j.at("protocol");
    if (!p.is_object() || !p.contains("base") || !p.contains("increment")) {
      r.errors.push_back("protocol: needs both \"base\" and \"increment\"");
    } else {
      std::size_t b = 0, i = 0;
      r.read(p, "base", b, "protocol.");
      r.read(p, "increment", i, "protocol.");
      r.positive(i, "protocol.increment");
      c.base = b;
      c.increment = i;
    }
  }

  if (j.contains("membership")) {
    std::string m;
    r.read(j, "membership", m, "");
    if (m == "any_positive")
      c.membership = TaskMembership::kAnyPositive;
    else if (m == "all_instances")
      c.membership = TaskMembership::kAllInstances;
    else
      r.errors.push_back("membership: expected \"any_positive\" or \"all_instances\"");
  }

  if (j.contains("methods")) {
    std::vector<std::string> names;
    r.read(j, "methods", names, "");
    c.methods.clear();
    for (const auto& n : names) {
      try {
        c.methods.push_back(parse_method(n));
      } catch (const ConfigError& e) {
        r.errors.push_back(e.what());
      }
    }
    if (names.empty()) r.errors.push_back("methods: at least one method is required");
  }
  r.read(j, "seeds", c.seeds, "");
  if (c.seeds.empty()) r.errors.push_back("seeds: at least one seed is required");

  if (j.contains("model")) {
    const json& m = j.at("model");
    const std::string p = "model.";
    r.unknown_keys(m, {"node_dim", "gin_hidden", "embed_dim", "latent_dim", "feature_dim", "activation"}, p);
    r.read(m, "node_dim", c.model.node_dim, p);
    r.read(m, "gin_hidden", c.model.gin_hidden, p);
    r.read(m, "embed_dim", c.model.embed_dim, p);
    r.read(m, "latent_dim", c.model.latent_dim, p);
    r.read(m, "feature_dim", c.model.feature_dim, p);
    std::string act = "relu";
    r.read(m, "activation", act, p);
    if (act == "relu")
      c.model.activation = Activation::kRelu;
    else if (act == "identity")
      c.model.activation = Activation::kIdentity;
    else
      r.errors.push_back("model.activation: expected \"relu\" or \"identity\"");
  }
  r.positive(c.model.node_dim, "model.node_dim");
  r.positive(c.model.embed_dim, "model.embed_dim");
  r.positive(c.model.latent_dim, "model.latent_dim");
  r.positive(c.model.feature_dim, "model.feature_dim");
  for (std::size_t h : c.model.gin_hidden) r.positive(h, "model.gin_hidden");

  if (j.contains("train")) {
    const json& t = j.at("train");
    const std::string p = "train.";
    r.unknown_keys(t, {"lr", "weight_decay", "beta1", "beta2", "epochs", "batch_size", "lambda1",
                       "lambda2", "lambda3", "beta", "sigma", "propagation_tolerance",
                       "propagation_max_iterations"}, p);
    r.read(t, "lr", c.train.adam.lr, p);
    r.read(t, "weight_decay", c.train.adam.weight_decay, p);
    r.read(t, "beta1", c.train.adam.beta1, p);
    r.read(t, "beta2", c.train.adam.beta2, p);
    r.read(t, "epochs", c.train.epochs, p);
    r.read(t, "batch_size", c.train.batch_size, p);
    r.read(t, "lambda1", c.train.weights.model_kd, p);
    r.read(t, "lambda2", c.train.weights.affective_kd, p);
    r.read(t, "lambda3", c.train.weights.reconstruction, p);
    r.read(t, "beta", c.train.beta, p);
    if (t.contains("sigma") && !(t.at("sigma").is_string() && t.at("sigma") == "median")) {
      double s = 0.0;
      r.read(t, "sigma", s, p);
      if (!(s > 0.0)) r.errors.push_back("train.sigma: must be positive or \"median\"");
      c.train.sigma = s;
    }
    r.read(t, "propagation_tolerance", c.train.propagation.tolerance, p);
    r.read(t, "propagation_max_iterations", c.train.propagation.max_iterations, p);
  }
  if (!(c.train.adam.lr > 0.0)) r.errors.push_back("train.lr: must be positive");
  r.non_negative(c.train.adam.weight_decay, "train.weight_decay");
  if (!(c.train.adam.beta1 >= 0.0 && c.train.adam.beta1 < 1.0)) r.errors.push_back("train.beta1: must lie in [0, 1)");
  if (!(c.train.adam.beta2 >= 0.0 && c.train.adam.beta2 < 1.0)) r.errors.push_back("train.beta2: must lie in [0, 1)");
  if (c.train.batch_size < kMinRsmBatch) r.errors.push_back("train.batch_size: must be at least 3");
  r.non_negative(c.train.weights.model_kd, "train.lambda1");
  r.non_negative(c.train.weights.affective_kd, "train.lambda2");
  r.non_negative(c.train.weights.reconstruction, "train.lambda3");
  if (!(c.train.beta >= 0.0 && c.train.beta < 1.0)) r.errors.push_back("train.beta: must lie in [0, 1)");
  if (!(c.train.propagation.tolerance > 0.0)) r.errors.push_back("train.propagation_tolerance: must be positive");
  if (c.train.propagation.max_iterations <= 0) r.errors.push_back("train.propagation_max_iterations: must be positive");

  if (j.contains("replay")) {
    const json& rp = j.at("replay");
    r.unknown_keys(rp, {"capacity", "sample_size"}, "replay.");
    r.read(rp, "capacity", c.replay_capacity, "replay.");
    if (rp.contains("sample_size")) {
      std::size_t s = 0;
      r.read(rp, "sample_size", s, "replay.");
      c.replay_sample = s;
    }
  }
  std::string out = c.output.string();
  r.read(j, "output", out, "");
  c.output = out;
  r.read(j, "jobs", c.jobs, "");
  r.positive(c.jobs, "jobs");

  if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open " + path.string()});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({"config: invalid JSON (" + std::string(e.what()) + ")"});
  }
  return parse_run_config(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  if (c.generate) j["dataset"] = {{"generate", generator_json(*c.generate)}};
  if (c.manifest) j["dataset"] = {{"manifest", c.manifest->string()}};
  if (c.base && c.increment) j["protocol"] = {{"base", *c.base}, {"increment", *c.increment}};
  j["membership"] = c.membership == TaskMembership::kAnyPositive ? "any_positive" : "all_instances";
  j["methods"] = json::array();
  for (Method m : c.methods) j["methods"].push_back(method_name(m));
  j["seeds"] = c.seeds;
  j["model"] = {{"node_dim", c.model.node_dim},
                {"gin_hidden", c.model.gin_hidden},
                {"embed_dim", c.model.embed_dim},
                {"latent_dim", c.model.latent_dim},
                {"feature_dim", c.model.feature_dim},
                {"activation", c.model.activation == Activation::kRelu ? "relu" : "identity"}};
  j["train"] = {{"lr", c.train.adam.lr},
                {"weight_decay", c.train.adam.weight_decay},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lambda1", c.train.weights.model_kd},
                {"lambda2", c.train.weights.affective_kd},
                {"lambda3", c.train.weights.reconstruction},
                {"beta", c.train.beta},
                {"propagation_tolerance", c.train.propagation.tolerance},
                {"propagation_max_iterations", c.train.propagation.max_iterations}};
  if (c.train.sigma)
    j["train"]["sigma"] = *c.train.sigma;
  else
    j["train"]["sigma"] = "median";
  j["replay"] = {{"capacity", c.replay_capacity}};
  if (c.replay_sample) j["replay"]["sample_size"] = *c.replay_sample;
  j["output"] = c.output.string();
  j["jobs"] = c.jobs;
  return j;
}

std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  // Where results go and how many workers produce them does not change them.
  j.erase("output");
  j.erase("jobs");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

// ---- running ------------------------------------------------------------------------

LoadedData load_data(const RunConfig& c) {
  LoadedData d;
  if (c.generate) {
    GeneratedData g = generate(*c.generate);
    d.dataset = std::move(g.dataset);
    d.oracle = std::move(g.oracle_graph);
    standardize_affective(d.dataset);
    return d;
  }
  if (!c.manifest) throw ConfigError({"dataset: required (\"generate\" or \"manifest\")"});
  d.dataset = load_dataset(*c.manifest);
  d.oracle = cooccurrence_adjacency(vconcat(d.dataset.train.labels, d.dataset.test.labels),
                                    d.dataset.train.label_ids);
  return d;
}

ProtocolResult run_method(const LoadedData& data, const RunConfig& c, Method method,
                          std::uint64_t seed) {
  if (!c.base || !c.increment) throw ConfigError({"protocol: required"});
  const std::size_t k = data.dataset.label_count();
  const Protocol protocol = method == Method::kUpperBound ? Protocol{k, 0, k}
                                                          : Protocol{k, *c.base, *c.increment};
  const TaskStream stream = make_stream(data.dataset, protocol, c.membership);
  AeslModel model = make_model(data.dataset.train.features.cols(), c.model, seed);

  ReplayBuffer buffer;
  buffer.capacity = c.replay_capacity;
  Rng replay_rng(derive_seed(seed, 4000));
  const TrainConfig& tc = c.train;

  TaskFn fn;
  switch (method) {
    case Method::kAesl:
      fn = [&](AeslModel m, const TaskDataset& d, std::size_t) { return train_task(std::move(m), d, tc); };
      break;
    case Method::kFinetune:
    case Method::kUpperBound:
      fn = [&](AeslModel m, const TaskDataset& d, std::size_t) { return finetune_task(std::move(m), d, tc); };
      break;
    case Method::kLwf:
      fn = [&](AeslModel m, const TaskDataset& d, std::size_t) { return lwf_task(std::move(m), d, tc); };
      break;
    case Method::kEr:
    case Method::kRs: {
      const ReplayConfig rc{method == Method::kEr ? ReplayPolicy::kRandom : ReplayPolicy::kReservoir,
                            c.replay_sample};
      fn = [&, rc](AeslModel m, const TaskDataset& d, std::size_t) {
        return replay_task(std::move(m), d, buffer, tc, rc, replay_rng);
      };
      break;
    }
  }
  return run_protocol(stream, std::move(model), fn, &data.oracle);
}

namespace {

std::string stream_name(const RunConfig& c, const LoadedData& d) {
  return d.dataset.name + " B" + std::to_string(c.base.value_or(0)) + "-I" +
         std::to_string(c.increment.value_or(0));
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_outputs(const RunConfig& c, const LoadedData& data, const std::vector<RunOutcome>& runs) {
  const fs::path out = c.output;
  fs::create_directories(out);
  const std::string hash = config_hash(c);
  const std::string stream = stream_name(c, data);

  json echo = to_json(c);
  echo["config_hash"] = hash;
  std::ofstream(out / "config.json") << echo.dump(2) << '\n';

  std::ofstream results(out / "results.csv");
  results << "# config_hash=" << hash << '\n'
          << "config_hash,stream,method,seed,task,seen_classes,map,macro_f1,micro_f1,erg_pcc\n";
  for (const auto& r : runs)
    for (const auto& s : r.result.metrics.steps)
      results << hash << ',' << stream << ',' << method_name(r.method) << ',' << r.seed << ','
              << s.task << ',' << s.seen_classes << ',' << fmt(s.map) << ',' << fmt(s.macro_f1)
              << ',' << fmt(s.micro_f1) << ',' << (s.erg_pcc ? fmt(*s.erg_pcc) : "") << '\n';

  // Per method and step: mean/min/max of mAP across seeds.
  std::ofstream curves(out / "curves.csv");
  curves << "# config_hash=" << hash << '\n' << "method,task,seen_classes,map_mean,map_min,map_max\n";
  json summary;
  summary["config_hash"] = hash;
  summary["stream"] = stream;
  summary["methods"] = json::object();
  for (Method m : c.methods) {
    std::vector<const RunOutcome*> mine;
    for (const auto& r : runs)
      if (r.method == m) mine.push_back(&r);
    if (mine.empty()) continue;
    const std::size_t steps = mine.front()->result.metrics.steps.size();
    for (std::size_t t = 0; t < steps; ++t) {
      double sum = 0.0, lo = 1.0, hi = 0.0;
      for (const auto* r : mine) {
        const double v = r->result.metrics.steps[t].map;
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      curves << method_name(m) << ',' << t << ',' << mine.front()->result.metrics.steps[t].seen_classes
             << ',' << fmt(sum / static_cast<double>(mine.size())) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
    }
    json per_seed = json::array();
    double avg = 0.0, last_map = 0.0, last_ma = 0.0, last_mi = 0.0;
    for (const auto* r : mine) {
      const auto& rep = r->result.metrics;
      per_seed.push_back({{"seed", r->seed},
                          {"avg_acc", rep.average_accuracy()},
                          {"last_map", rep.last().map},
                          {"last_macro_f1", rep.last().macro_f1},
                          {"last_micro_f1", rep.last().micro_f1}});
      avg += rep.average_accuracy();
      last_map += rep.last().map;
      last_ma += rep.last().macro_f1;
      last_mi += rep.last().micro_f1;
    }
    const double n = static_cast<double>(mine.size());
    summary["methods"][method_name(m)] = {{"avg_acc", avg / n},
                                          {"last_map", last_map / n},
                                          {"last_macro_f1", last_ma / n},
                                          {"last_micro_f1", last_mi / n},
                                          {"runs", per_seed}};
  }
  std::ofstream(out / "summary.json") << summary.dump(2) << '\n';

  for (const auto& r : runs) {
    const fs::path dir = out / "runs" / (std::string(method_name(r.method)) + "_seed" + std::to_string(r.seed));
    fs::create_directories(dir);
    for (std::size_t t = 0; t < r.result.graphs.size(); ++t) {
      json g = r.result.graphs[t];
      g["config_hash"] = hash;
      const auto& pcc = r.result.metrics.steps[t].erg_pcc;
      g["pcc_vs_oracle"] = pcc ? json(*pcc) : json(nullptr);
      std::ofstream(dir / ("erg_" + std::to_string(t) + ".json")) << g.dump() << '\n';
    }
    save_checkpoint(r.result.model, dir / "model");
  }
}

}  // namespace

std::vector<RunOutcome> run_experiment(const RunConfig& c, std::ostream* log) {
  const LoadedData data = load_data(c);
  struct Slot {
    Method method;
    std::uint64_t seed;
    std::optional<ProtocolResult> result;
    std::exception_ptr error;
  };
  std::vector<Slot> slots;
  for (Method m : c.methods)
    for (std::uint64_t s : c.seeds) slots.push_back({m, s, std::nullopt, nullptr});

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      Slot& slot = slots[i];
      try {
        slot.result = run_method(data, c, slot.method, slot.seed);
        if (log != nullptr) {
          std::lock_guard lock(log_mutex);
          *log << method_name(slot.method) << " seed " << slot.seed << ": last mAP "
               << slot.result->metrics.last().map << '\n';
        }
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(c.jobs, slots.size()));
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<RunOutcome> runs;
  for (auto& slot : slots) {
    if (slot.error) {
      try {
        std::rethrow_exception(slot.error);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("run ") + method_name(slot.method) + " seed " +
                                  std::to_string(slot.seed) + ": " + e.what(),
                              e.component());
      }
    }
    runs.push_back({slot.method, slot.seed, std::move(*slot.result)});
  }
  write_outputs(c, data, runs);
  return runs;
}

// ---- comparison ----------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ResultsFile read_results(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::kMissingFile, "missing file: " + path.string());
  std::string line;
  std::getline(in, line);
  const std::string prefix = "# config_hash=";
  if (line.rfind(prefix, 0) != 0)
    throw DataError(DataErrorKind::kMalformed, path.string() + ": missing config hash header");
  ResultsFile f;
  f.hash = line.substr(prefix.size());
  std::getline(in, line);  // column names

  // method -> seed -> (task, map) of the last step
  std::map<std::string, std::map<std::string, std::pair<long, double>>> last;
  std::size_t row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 10)
      throw DataError(DataErrorKind::kMalformed, path.string() + ": row " + std::to_string(row) + " has " +
                                                     std::to_string(cells.size()) + " columns");
    if (cells[0] != f.hash)
      throw DataError(DataErrorKind::kMalformed, path.string() + ": row " + std::to_string(row) +
                                                     " carries config hash " + cells[0] +
                                                     ", header says " + f.hash);
    f.stream = cells[1];
    if (std::find(f.methods.begin(), f.methods.end(), cells[2]) == f.methods.end())
      f.methods.push_back(cells[2]);
    const long task = std::stol(cells[4]);
    auto& slot = last[cells[2]][cells[3]];
    if (task >= slot.first) slot = {task, std::stod(cells[6])};
  }
  for (const auto& m : f.methods) {
    double sum = 0.0;
    for (const auto& [seed, v] : last[m]) sum += v.second;
    f.last_map.push_back(sum / static_cast<double>(last[m].size()));
  }
  return f;
}

CompareReport compare_scores(const std::vector<std::string>& methods,
                             const std::vector<std::string>& streams,
                             const std::vector<std::vector<double>>& scores, double alpha) {
  if (methods.size() < 2) throw Error("compare: need at least two methods");
  if (streams.size() < 2) throw Error("compare: need at least two datasets/streams");
  CompareReport r;
  r.methods = methods;
  r.streams = streams;
  const RankTable table = rank_table(scores, true);
  r.average_ranks = table.average_ranks();
  const std::size_t k = methods.size();
  const std::size_t n = streams.size();
  try {
    r.friedman = friedman(table);
  } catch (const DegenerateError&) {
    r.friedman.reset();
  }
  r.critical_value = friedman_critical_value(alpha, k, n);
  r.cd = nemenyi_cd(nemenyi_q(alpha, k), k, n);
  r.significant.assign(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      r.significant[i][j] = std::abs(r.average_ranks[i] - r.average_ranks[j]) > r.cd;
  return r;
}

CompareReport compare_results(const std::vector<fs::path>& files, double alpha) {
  if (files.size() < 2) throw Error("compare: need at least two results files (one per stream)");
  std::vector<ResultsFile> parsed;
  for (const auto& f : files) parsed.push_back(read_results(f));
  const auto& methods = parsed.front().methods;
  std::vector<std::string> streams;
  std::vector<std::vector<double>> scores;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (parsed[i].methods != methods)
      throw Error("compare: " + files[i].string() + " lists different methods than " + files[0].string());
    streams.push_back(parsed[i].stream + " [" + parsed[i].hash + "]");
    scores.push_back(parsed[i].last_map);
  }
  return compare_scores(methods, streams, scores, alpha);
}

void print_report(std::ostream& out, const CompareReport& r) {
  out << "methods: " << r.methods.size() << ", streams: " << r.streams.size() << '\n';
  out << "average ranks:\n";
  for (std::size_t j = 0; j < r.methods.size(); ++j)
    out << "  " << r.methods[j] << ' ' << std::fixed << std::setprecision(3) << r.average_ranks[j] << '\n';
  if (r.friedman && r.friedman->chi_square == 0.0) {
    out << "degenerate: all methods tie on average rank, nothing to separate\n";
  } else if (r.friedman) {
    out << "chi2_F = " << r.friedman->chi_square << ", F_F = " << r.friedman->f_statistic
        << ", critical F = " << r.critical_value
        << (r.friedman->f_statistic > r.critical_value ? " (reject equal performance)" : " (no rejection)")
        << '\n';
  } else {
    out << "Friedman statistic degenerate: every stream ranks the methods identically\n";
  }
  out << "CD = " << r.cd << '\n';
  for (std::size_t i = 0; i < r.methods.size(); ++i)
    for (std::size_t j = i + 1; j < r.methods.size(); ++j)
      if (r.significant[i][j]) out << "  " << r.methods[i] << " vs " << r.methods[j] << ": significant\n";
  out << std::defaultfloat;
}

}  // namespace aesl
