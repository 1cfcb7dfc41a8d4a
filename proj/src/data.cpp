#include "aesl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "aesl/distillation.hpp"
#include "aesl/error.hpp"
#include "aesl/rng.hpp"

namespace aesl {

namespace fs = std::filesystem;

void TaskDataset::validate() const {
  const std::size_t n = features.rows();
  if (labels.rows() != n || affective.rows() != n)
    throw DataError(DataErrorKind::kRowMismatch,
                    "dataset rows disagree: features " + std::to_string(n) + ", labels " +
                        std::to_string(labels.rows()) + ", affective " +
                        std::to_string(affective.rows()));
  if (labels.cols() != label_ids.size())
    throw DataError(DataErrorKind::kMalformed, "label matrix has " + std::to_string(labels.cols()) +
                                                   " columns for " +
                                                   std::to_string(label_ids.size()) + " label ids");
  for (const Matrix* m : {&features, &affective})
    for (std::size_t i = 0; i < m->size(); ++i)
      if (!std::isfinite(m->values()[i]))
        throw DataError(DataErrorKind::kMalformed,
                        std::string(m == &features ? "feature" : "affective") + " value at row " +
                            std::to_string(i / m->cols()) + ", column " +
                            std::to_string(i % m->cols()) + " is not finite");
  for (std::size_t r = 0; r < labels.rows(); ++r)
    for (std::size_t c = 0; c < labels.cols(); ++c) {
      const double v = labels(r, c);
      if (v != 0.0 && v != 1.0)
        throw DataError(DataErrorKind::kInvalidLabel,
                        "label value " + std::to_string(v) + " at row " + std::to_string(r) +
                            ", column " + std::to_string(c) + " is not 0/1");
    }
}

std::vector<std::vector<int>> split_protocol(const Protocol& p) {
  const bool consistent = p.increment > 0 && p.total_labels > p.base &&
                          (p.total_labels - p.base) % p.increment == 0;
  if (!consistent)
    throw Error("protocol B" + std::to_string(p.base) + "-I" + std::to_string(p.increment) +
                " is inconsistent: " + std::to_string(p.base) + " + k*" +
                std::to_string(p.increment) + " != " + std::to_string(p.total_labels) +
                " for every integer k >= 1");
  std::vector<std::vector<int>> tasks;
  int next = 0;
  auto take = [&](std::size_t count) {
    std::vector<int> ids(count);
    for (auto& id : ids) id = next++;
    tasks.push_back(std::move(ids));
  };
  if (p.base > 0) take(p.base);
  for (std::size_t k = 0; k < (p.total_labels - p.base) / p.increment; ++k) take(p.increment);
  return tasks;
}

TaskDataset restrict_labels(const TaskDataset& full, std::span<const int> ids,
                            TaskMembership membership) {
  std::vector<std::size_t> cols;
  for (int id : ids) {
    auto it = std::find(full.label_ids.begin(), full.label_ids.end(), id);
    if (it == full.label_ids.end()) throw Error("restrict_labels: unknown label id " + std::to_string(id));
    cols.push_back(static_cast<std::size_t>(it - full.label_ids.begin()));
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < full.size(); ++r) {
    bool keep = membership == TaskMembership::kAllInstances;
    for (std::size_t c : cols) keep = keep || full.labels(r, c) != 0.0;
    if (keep) rows.push_back(r);
  }
  TaskDataset out;
  out.features = full.features.select_rows(rows);
  out.affective = full.affective.select_rows(rows);
  out.labels = Matrix(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out.labels(i, j) = full.labels(rows[i], cols[j]);
  out.label_ids.assign(ids.begin(), ids.end());
  for (std::size_t r : rows)
    out.instance_ids.push_back(full.instance_ids.empty() ? r : full.instance_ids[r]);
  out.split = full.split;
  return out;
}

TaskStream make_stream(const Dataset& data, const Protocol& protocol, TaskMembership membership) {
  if (protocol.total_labels != data.label_count())
    throw Error("make_stream: protocol covers " + std::to_string(protocol.total_labels) +
                " labels but the dataset has " + std::to_string(data.label_count()));
  TaskStream s;
  s.classes = split_protocol(protocol);
  std::vector<int> seen;
  for (const auto& ids : s.classes) {
    s.train.push_back(restrict_labels(data.train, ids, membership));
    seen.insert(seen.end(), ids.begin(), ids.end());
    s.test.push_back(restrict_labels(data.test, seen, TaskMembership::kAnyPositive));
  }
  return s;
}

Matrix threshold_ratings(const Matrix& ratings, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw DomainError("threshold_ratings: threshold must lie in (0, 1), got " +
                      std::to_string(threshold));
  Matrix y(ratings.rows(), ratings.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] = ratings.values()[i] >= threshold;
  return y;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Intercept a such that the mean over instances of Σ_k sigmoid(a − b·d_ik)
// equals the target cardinality.
double calibrate_intercept(const Matrix& dist, double slope, double target) {
  auto cardinality = [&](double a) {
    double total = 0.0;
    for (double d : dist.values()) total += sigmoid(a - slope * d);
    return total / static_cast<double>(dist.rows());
  };
  double lo = -60.0;
  double hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cardinality(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void check_generator(const GeneratorConfig& c) {
  std::vector<std::string> bad;
  if (c.n_train == 0) bad.push_back("n_train must be positive");
  if (c.n_test == 0) bad.push_back("n_test must be positive");
  if (c.labels == 0) bad.push_back("labels must be positive");
  if (c.affective_dims == 0) bad.push_back("affective_dims must be positive");
  if (c.feature_dims == 0) bad.push_back("feature_dims must be positive");
  if (!(c.label_cardinality > 0.0 && c.label_cardinality < static_cast<double>(c.labels)))
    bad.push_back("label_cardinality must lie in (0, labels)");
  for (double s : {c.prototype_scale, c.distance_slope, c.label_signal, c.latent_signal,
                   c.feature_noise, c.affective_noise})
    if (!(s >= 0.0)) bad.push_back("noise and scale parameters must be non-negative");
  if (!bad.empty()) throw ConfigError(bad);
}

}  // namespace

GeneratedData generate(const GeneratorConfig& cfg) {
  check_generator(cfg);
  Rng rng(cfg.seed);
  const std::size_t n = cfg.n_train + cfg.n_test;
  const std::size_t k = cfg.labels;

  Matrix prototypes = normal_matrix(k, cfg.affective_dims, cfg.prototype_scale, rng);
  Matrix latent = normal_matrix(n, cfg.affective_dims, 1.0, rng);
  Matrix dist(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double ss = 0.0;
      for (std::size_t c = 0; c < cfg.affective_dims; ++c) {
        const double d = latent(i, c) - prototypes(j, c);
        ss += d * d;
      }
      dist(i, j) = std::sqrt(ss);
    }
  const double intercept = calibrate_intercept(dist, cfg.distance_slope, cfg.label_cardinality);

  Matrix y(n, k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool ok = false;
  for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j)
        y(i, j) = unit(rng) < sigmoid(intercept - cfg.distance_slope * dist(i, j)) ? 1.0 : 0.0;
    ok = true;
    for (std::size_t j = 0; j < k && ok; ++j) {
      double train_pos = 0.0;
      double test_pos = 0.0;
      for (std::size_t i = 0; i < n; ++i) (i < cfg.n_train ? train_pos : test_pos) += y(i, j);
      ok = train_pos > 0.0 && test_pos > 0.0;
    }
  }
  if (!ok) throw Error("generate: a label has no positives after 10 resampling attempts");

  Matrix label_loading = normal_matrix(k, cfg.feature_dims, cfg.label_signal, rng);
  Matrix latent_loading = normal_matrix(cfg.affective_dims, cfg.feature_dims, cfg.latent_signal, rng);
  Matrix x = matmul(y, label_loading) + matmul(latent, latent_loading) +
             normal_matrix(n, cfg.feature_dims, cfg.feature_noise, rng);
  Matrix t = latent + normal_matrix(n, cfg.affective_dims, cfg.affective_noise, rng);

  GeneratedData out;
  out.prototypes = std::move(prototypes);
  out.intercept = intercept;
  out.oracle_graph = cooccurrence_adjacency(y);
  std::vector<int> ids(k);
  for (std::size_t j = 0; j < k; ++j) ids[j] = static_cast<int>(j);

  auto slice = [&](std::size_t begin, std::size_t count, Split split) {
    std::vector<std::size_t> rows(count);
    for (std::size_t i = 0; i < count; ++i) rows[i] = begin + i;
    TaskDataset d;
    d.features = x.select_rows(rows);
    d.labels = y.select_rows(rows);
    d.affective = t.select_rows(rows);
    d.label_ids = ids;
    d.instance_ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) d.instance_ids[i] = i;
    d.split = split;
    return d;
  };
  out.dataset.name = "synthetic-" + std::to_string(cfg.seed);
  out.dataset.threshold = cfg.threshold;
  out.dataset.train = slice(0, cfg.n_train, Split::kTrain);
  out.dataset.test = slice(cfg.n_train, cfg.n_test, Split::kTest);
  return out;
}

void standardize_affective(Dataset& data) {
  const Matrix reference = data.train.affective;
  data.train.affective = standardize_columns(data.train.affective, reference);
  data.test.affective = standardize_columns(data.test.affective, reference);
}

// ---- CSV ------------------------------------------------------------------

namespace {

void write_csv(const fs::path& path, const std::string& prefix, const Matrix& m,
               std::span<const int> column_ids = {}) {
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::kMissingFile, "cannot write " + path.string());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (c) out << ',';
    out << prefix << (column_ids.empty() ? static_cast<int>(c) : column_ids[c]);
  }
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::kMissingFile, "missing file: " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line))
    throw DataError(DataErrorKind::kMalformed, path.string() + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t cols = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma)
        throw DataError(DataErrorKind::kMalformed, path.string() + ": bad number at row " +
                                                       std::to_string(rows) + ", column " +
                                                       std::to_string(cols));
      values.push_back(v);
      ++cols;
      p = comma + 1;
    }
    if (cols != t.header.size())
      throw DataError(DataErrorKind::kMalformed, path.string() + ": row " + std::to_string(rows) +
                                                     " has " + std::to_string(cols) +
                                                     " columns, header has " +
                                                     std::to_string(t.header.size()));
    ++rows;
  }
  t.values = Matrix(rows, t.header.size(), std::move(values));
  return t;
}

const char* kFileKeys[] = {"features_train", "features_test", "labels_train",
                           "labels_test",    "affective_train", "affective_test"};

}  // namespace

void save_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  write_csv(dir / "features_train.csv", "f", data.train.features);
  write_csv(dir / "features_test.csv", "f", data.test.features);
  write_csv(dir / "labels_train.csv", "l", data.train.labels, data.train.label_ids);
  write_csv(dir / "labels_test.csv", "l", data.test.labels, data.test.label_ids);
  write_csv(dir / "affective_train.csv", "a", data.train.affective);
  write_csv(dir / "affective_test.csv", "a", data.test.affective);
  nlohmann::json files;
  for (const char* key : kFileKeys) files[key] = std::string(key) + ".csv";
  nlohmann::json manifest = {{"name", data.name},
                             {"n_train", data.train.size()},
                             {"n_test", data.test.size()},
                             {"K", data.label_count()},
                             {"d_aff", data.train.affective.cols()},
                             {"D", data.train.features.cols()},
                             {"threshold", data.threshold},
                             {"files", files}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& manifest_path, const LoadOptions& options) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError(DataErrorKind::kMissingFile, "missing file: " + manifest_path.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::kMalformed, manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  auto file = [&](const char* key) {
    if (!m.contains("files") || !m["files"].contains(key))
      throw DataError(DataErrorKind::kMalformed, "manifest lacks files." + std::string(key));
    return base / m["files"][key].get<std::string>();
  };
  Dataset d;
  d.name = m.value("name", std::string("dataset"));
  d.threshold = m.value("threshold", 0.1);

  auto load_split = [&](const char* f, const char* l, const char* a, Split split,
                        const char* count_key) {
    TaskDataset t;
    t.features = read_csv(file(f)).values;
    CsvTable labels = read_csv(file(l));
    t.labels = std::move(labels.values);
    for (const auto& h : labels.header) {
      int id = 0;
      const char* p = h.data() + (h.empty() || h[0] != 'l' ? 0 : 1);
      auto res = std::from_chars(p, h.data() + h.size(), id);
      if (res.ec != std::errc())
        throw DataError(DataErrorKind::kMalformed, file(l).string() + ": bad label header " + h);
      t.label_ids.push_back(id);
    }
    t.affective = read_csv(file(a)).values;
    t.split = split;
    t.instance_ids.resize(t.features.rows());
    for (std::size_t i = 0; i < t.instance_ids.size(); ++i) t.instance_ids[i] = i;
    t.validate();
    if (m.contains(count_key) && m[count_key].get<std::size_t>() != t.size())
      throw DataError(DataErrorKind::kRowMismatch,
                      std::string("manifest ") + count_key + " = " +
                          std::to_string(m[count_key].get<std::size_t>()) + " but files hold " +
                          std::to_string(t.size()) + " rows");
    return t;
  };
  d.train = load_split("features_train", "labels_train", "affective_train", Split::kTrain, "n_train");
  d.test = load_split("features_test", "labels_test", "affective_test", Split::kTest, "n_test");
  if (d.train.label_ids != d.test.label_ids)
    throw DataError(DataErrorKind::kMalformed, "train and test label columns differ");
  if (options.standardize_affective) standardize_affective(d);
  return d;
}

}  // namespace aesl
