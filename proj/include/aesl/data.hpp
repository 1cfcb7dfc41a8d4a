#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aesl/matrix.hpp"
#include "aesl/relation_graph.hpp"

namespace aesl {

enum class Split { kTrain, kTest };

/// Instances of one split, with labels over `label_ids` (columns in order).
struct TaskDataset {
  Matrix features;   // n × D
  Matrix labels;     // n × |label_ids|, entries in {0, 1}
  Matrix affective;  // n × d_aff
  std::vector<int> label_ids;
  std::vector<std::size_t> instance_ids;  // row positions in the source split
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return features.rows(); }
  /// Throws DataError on row-count disagreement or non-binary labels.
  void validate() const;
};

/// A full corpus over all K labels.
struct Dataset {
  std::string name = "dataset";
  double threshold = 0.1;
  TaskDataset train;
  TaskDataset test;

  std::size_t label_count() const noexcept { return train.label_ids.size(); }
};

/// B<base>-I<increment> over `total_labels` classes in id order.
struct Protocol {
  std::size_t total_labels = 0;
  std::size_t base = 0;
  std::size_t increment = 0;
};

/// Label-id sets per task: the base set first (when base > 0), then the
/// increments. Throws Error when base + k·increment ≠ total for any k ≥ 1.
std::vector<std::vector<int>> split_protocol(const Protocol& p);

/// Which instances a task's split contains.
enum class TaskMembership {
  kAnyPositive,   // instances carrying at least one of the task's labels
  kAllInstances,  // every instance, with only the task's labels visible
};

/// Rows of `full` selected per `membership`, with label columns restricted
/// to `ids` (in the given order).
TaskDataset restrict_labels(const TaskDataset& full, std::span<const int> ids,
                            TaskMembership membership);

/// Per-task training sets and the cumulative test set after each task.
struct TaskStream {
  std::vector<std::vector<int>> classes;
  std::vector<TaskDataset> train;
  std::vector<TaskDataset> test;  // test[b] covers classes of tasks 0..b

  std::size_t tasks() const noexcept { return classes.size(); }
};

TaskStream make_stream(const Dataset& data, const Protocol& protocol,
                       TaskMembership membership = TaskMembership::kAnyPositive);

/// Y_ik = 1 iff rating ≥ threshold. Throws DomainError unless 0 < t < 1.
Matrix threshold_ratings(const Matrix& ratings, double threshold);

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::size_t n_train = 600;
  std::size_t n_test = 300;
  std::size_t labels = 20;           // K
  std::size_t affective_dims = 4;    // d_aff
  std::size_t feature_dims = 40;     // D
  double label_cardinality = 4.6;    // target mean labels per instance
  double prototype_scale = 1.0;      // spread of label prototypes
  double distance_slope = 3.0;       // b in sigmoid(a − b·‖u − p_k‖)
  double label_signal = 1.0;         // scale of the label → feature loadings
  double latent_signal = 0.5;        // scale of the latent → feature loadings
  double feature_noise = 0.5;
  double affective_noise = 0.3;
  double threshold = 0.1;            // recorded in the manifest
};

struct GeneratedData {
  Dataset dataset;
  RelationGraph oracle_graph;  // co-occurrence over every generated instance
  Matrix prototypes;           // K × d_aff
  double intercept = 0.0;      // calibrated a
};

/// Synthetic corpus with a ground-truth affective latent space. Affective
/// ratings are emitted raw; see standardize_affective.
GeneratedData generate(const GeneratorConfig& cfg);

/// Standardises affective columns of both splits with training statistics.
void standardize_affective(Dataset& data);

struct LoadOptions {
  bool standardize_affective = true;
};

/// Writes manifest.json and the six CSV files into `dir`.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest, const LoadOptions& options = {});

}  // namespace aesl
