#pragma once

// Per-task training: model growth (graph augmentation, node features, head
// columns), the joint objective, and the protocol driver.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "aesl/adam.hpp"
#include "aesl/data.hpp"
#include "aesl/evaluation.hpp"
#include "aesl/model.hpp"
#include "aesl/relation_graph.hpp"
#include "aesl/rng.hpp"

namespace aesl {

struct LossWeights {
  double model_kd = 1.0;        // λ1
  double affective_kd = 0.5;    // λ2
  double reconstruction = 1.0;  // λ3

  /// Throws ConfigError unless every weight is finite and ≥ 0.
  void validate() const;
};

/// Components that carry a zero weight are not evaluated and read 0.
struct LossReport {
  double ce = 0.0;
  double kd_model = 0.0;
  double kd_affective = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
};

/// How old-class targets for the new task's instances are produced.
enum class OldTargets {
  kNone,        // old columns masked out of the BCE
  kRaw,         // teacher scores used as-is
  kPropagated,  // teacher scores refined by label propagation
};

struct TrainConfig {
  AdamConfig adam;
  LossWeights weights;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  OldTargets old_targets = OldTargets::kPropagated;
  double beta = 0.95;
  std::optional<double> sigma;  // median pairwise distance when unset
  PropagationOptions propagation;
};

/// One minibatch. `targets` and `mask` span all labels of the model.
struct Batch {
  Matrix features;
  Matrix targets;
  Matrix mask;
  Matrix affective;
};

/// −Σ_k mask·[y log s + (1−y) log(1−s)], summed over labels and averaged over
/// rows; scores clamped into [1e-7, 1 − 1e-7].
double bce_loss(const Matrix& scores, const Matrix& targets, const Matrix& mask);
double bce_loss(const Matrix& scores, const Matrix& targets);

inline constexpr double kScoreClamp = 1e-7;

/// Teacher scores on `data` for the teacher's labels, optionally refined by
/// label propagation over an instance-similarity graph of the features.
Matrix compute_soft_labels(const AeslModel& teacher, const TaskDataset& data,
                           const TrainConfig& config);

/// Loss of `model` on a batch; `teacher` (may be null) supplies the
/// model-distillation RSM.
LossReport total_loss(const AeslModel& model, const Batch& batch, const AeslModel* teacher,
                      const LossWeights& weights);

namespace ad {

struct LossTerms {
  Var ce, kd_model, kd_affective, reconstruction, total;
  bool has_model_kd = false, has_affective_kd = false, has_reconstruction = false;

  LossReport report() const;
};

/// Builds the objective on the tape of `bound`. `teacher_rsm` is the old
/// model's latent RSM on the same batch, if any.
LossTerms total_loss(const BoundModel& bound, const Batch& batch, const Matrix* teacher_rsm,
                     const LossWeights& weights);

Var bce(Var scores, const Matrix& targets, const Matrix& mask);

}  // namespace ad

/// Grows `model` for a task over `new_labels`: augments the graph (cross
/// blocks from `soft_old`, zero when absent), appends node rows and head
/// columns. Old blocks, rows and columns are copied untouched.
void grow_model(AeslModel& model, const TaskDataset& data, const Matrix* soft_old);

struct TrainHooks {
  /// Called after every epoch with the mean loss over its batches.
  std::function<void(std::size_t epoch, const LossReport&)> on_epoch;
  /// May append rows to a batch before its loss is built (replay).
  std::function<void(Batch&)> extend_batch;
};

/// Trains one task: teacher snapshot, soft labels, growth, then minibatch
/// Adam on the joint objective. Throws DivergenceError naming the loss
/// component that became non-finite.
AeslModel train_task(AeslModel model, const TaskDataset& data, const TrainConfig& config,
                     const TrainHooks& hooks = {});

/// Mixed targets for a task's rows: [soft_old, Y] with mask [1 or 0, 1].
struct TaskTargets {
  Matrix targets;
  Matrix mask;
};
TaskTargets mixed_targets(const TaskDataset& data, std::size_t old_labels, const Matrix* soft_old);

using TaskFn = std::function<AeslModel(AeslModel, const TaskDataset&, std::size_t task)>;

struct ProtocolResult {
  MetricsReport metrics;
  AeslModel model;
  std::vector<RelationGraph> graphs;  // after each task
};

/// Trains the stream task by task and evaluates on the cumulative test set
/// after each. When `oracle` is given, each step records the PCC between the
/// model's graph and the oracle restricted to the seen labels. Overlapping
/// class sets are rejected before any training.
ProtocolResult run_protocol(const TaskStream& stream, AeslModel model, const TaskFn& train,
                            const RelationGraph* oracle = nullptr);

/// Oracle adjacency restricted (and reordered) to `labels`.
RelationGraph restrict_graph(const RelationGraph& oracle, const std::vector<int>& labels);

}  // namespace aesl
