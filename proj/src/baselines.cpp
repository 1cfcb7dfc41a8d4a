#include "aesl/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "aesl/error.hpp"

namespace aesl {

namespace {

TrainConfig without_mechanisms(TrainConfig c, OldTargets targets) {
  c.weights = {0.0, 0.0, 0.0};
  c.old_targets = targets;
  return c;
}

}  // namespace

AeslModel finetune_task(AeslModel model, const TaskDataset& data, const TrainConfig& config) {
  return train_task(std::move(model), data, without_mechanisms(config, OldTargets::kNone));
}

AeslModel lwf_task(AeslModel model, const TaskDataset& data, const TrainConfig& config) {
  return train_task(std::move(model), data, without_mechanisms(config, OldTargets::kRaw));
}

void reservoir_update(ReplayBuffer& buffer, ReplayRecord item, Rng& rng) {
  ++buffer.seen;
  if (buffer.capacity == 0) return;
  if (buffer.records.size() < buffer.capacity) {
    buffer.records.push_back(std::move(item));
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, buffer.seen - 1);
  const std::size_t slot = pick(rng);
  if (slot < buffer.capacity) buffer.records[slot] = std::move(item);
}

namespace {

ReplayRecord make_record(const TaskDataset& data, std::size_t row, std::size_t task) {
  auto f = data.features.row_span(row);
  auto a = data.affective.row_span(row);
  auto y = data.labels.row_span(row);
  return {{f.begin(), f.end()}, {a.begin(), a.end()}, {y.begin(), y.end()}, data.label_ids, task};
}

}  // namespace

void store_task(ReplayBuffer& buffer, const TaskDataset& data, std::size_t task,
                ReplayPolicy policy, Rng& rng) {
  if (policy == ReplayPolicy::kReservoir) {
    for (std::size_t r = 0; r < data.size(); ++r) reservoir_update(buffer, make_record(data, r, task), rng);
    return;
  }
  // Equal share per stored task: shrink every older task to its share, then
  // add a uniform sample of the new one.
  buffer.seen += data.size();
  std::vector<std::size_t> tasks;
  for (const auto& rec : buffer.records)
    if (std::find(tasks.begin(), tasks.end(), rec.task) == tasks.end()) tasks.push_back(rec.task);
  tasks.push_back(task);
  const std::size_t share = buffer.capacity / tasks.size();

  std::vector<ReplayRecord> kept;
  for (std::size_t t : tasks) {
    if (t == task) continue;
    std::vector<ReplayRecord> own;
    for (auto& rec : buffer.records)
      if (rec.task == t) own.push_back(std::move(rec));
    std::shuffle(own.begin(), own.end(), rng);
    own.resize(std::min(own.size(), share));
    for (auto& rec : own) kept.push_back(std::move(rec));
  }
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  const std::size_t room = buffer.capacity - std::min(buffer.capacity, kept.size());
  rows.resize(std::min({rows.size(), share, room}));
  for (std::size_t r : rows) kept.push_back(make_record(data, r, task));
  buffer.records = std::move(kept);
}

AeslModel replay_task(AeslModel model, const TaskDataset& data, ReplayBuffer& buffer,
                      const TrainConfig& config, const ReplayConfig& replay, Rng& rng) {
  const std::size_t sample = replay.sample_size.value_or(config.batch_size);
  const std::size_t task = static_cast<std::size_t>(model.task_index);

  TrainHooks hooks;
  // Label positions are fixed once the model has grown; the hook runs after growth.
  std::vector<int> labels = model.graph.labels;
  labels.insert(labels.end(), data.label_ids.begin(), data.label_ids.end());
  hooks.extend_batch = [&](Batch& batch) {
    const std::size_t take = std::min(buffer.size(), sample);
    if (take == 0) return;
    std::vector<std::size_t> idx(buffer.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(take);
    const std::size_t width = labels.size();
    Matrix x(take, batch.features.cols());
    Matrix a(take, batch.affective.cols());
    Matrix y(take, width);
    Matrix m(take, width);
    for (std::size_t i = 0; i < take; ++i) {
      const ReplayRecord& rec = buffer.records[idx[i]];
      if (rec.features.size() != x.cols() || rec.affective.size() != a.cols())
        throw ShapeError("replay: stored record width disagrees with the task data");
      std::copy(rec.features.begin(), rec.features.end(), x.row_span(i).begin());
      std::copy(rec.affective.begin(), rec.affective.end(), a.row_span(i).begin());
      for (std::size_t j = 0; j < rec.label_ids.size(); ++j) {
        auto it = std::find(labels.begin(), labels.end(), rec.label_ids[j]);
        if (it == labels.end()) throw Error("replay: stored label unknown to the model");
        const auto col = static_cast<std::size_t>(it - labels.begin());
        y(i, col) = rec.labels[j];
        m(i, col) = 1.0;
      }
    }
    batch.features = vconcat(batch.features, x);
    batch.affective = vconcat(batch.affective, a);
    batch.targets = vconcat(batch.targets, y);
    batch.mask = vconcat(batch.mask, m);
  };
  model = train_task(std::move(model), data, [&] {
    TrainConfig c = config;
    c.weights = {0.0, 0.0, 0.0};
    c.old_targets = OldTargets::kNone;
    return c;
  }(), hooks);
  store_task(buffer, data, task, replay.policy, rng);
  return model;
}

}  // namespace aesl
