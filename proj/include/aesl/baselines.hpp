#pragma once

// Comparison methods over the shared backbone. Each is a per-task training
// function; they differ from AESL only in target construction, loss weights
// and buffering.

#include <cstdint>
#include <vector>

#include "aesl/trainer.hpp"

namespace aesl {

/// No anti-forgetting: zero loss weights, old classes masked out of the BCE.
AeslModel finetune_task(AeslModel model, const TaskDataset& data, const TrainConfig& config);

/// Teacher scores on the new data as old-class targets, without propagation
/// and without the relation or reconstruction losses.
AeslModel lwf_task(AeslModel model, const TaskDataset& data, const TrainConfig& config);

/// One stored instance. Labels cover only the source task's classes.
struct ReplayRecord {
  std::vector<double> features;
  std::vector<double> affective;
  std::vector<double> labels;
  std::vector<int> label_ids;
  std::size_t task = 0;
};

struct ReplayBuffer {
  std::size_t capacity = 500;
  std::vector<ReplayRecord> records;
  std::size_t seen = 0;  // items offered so far (reservoir bookkeeping)

  std::size_t size() const noexcept { return records.size(); }
};

/// Classic reservoir step: fill, then replace a uniform slot with
/// probability capacity/seen.
void reservoir_update(ReplayBuffer& buffer, ReplayRecord item, Rng& rng);

enum class ReplayPolicy {
  kRandom,     // ER: equal share per task, drawn uniformly from each task
  kReservoir,  // RS: reservoir sampling over the instance stream
};

/// Stores `data` (labels restricted to its own classes) per `policy`.
void store_task(ReplayBuffer& buffer, const TaskDataset& data, std::size_t task,
                ReplayPolicy policy, Rng& rng);

struct ReplayConfig {
  ReplayPolicy policy = ReplayPolicy::kRandom;
  /// Replayed rows per minibatch are min(buffer size, sample_size); unset
  /// means the training batch size, 0 disables replay.
  std::optional<std::size_t> sample_size;
};

/// Finetune with each minibatch extended by a uniform buffer sample. Stored
/// labels are zero-padded to the model's width and the padding is masked out
/// of the loss. The buffer is updated with `data` afterwards.
AeslModel replay_task(AeslModel model, const TaskDataset& data, ReplayBuffer& buffer,
                      const TrainConfig& config, const ReplayConfig& replay, Rng& rng);

}  // namespace aesl
