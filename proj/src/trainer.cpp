#include "aesl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "aesl/distillation.hpp"
#include "aesl/error.hpp"
#include "aesl/semantics.hpp"

namespace aesl {

void LossWeights::validate() const {
  std::vector<std::string> bad;
  auto check = [&](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
      bad.push_back(std::string(name) + ": must be finite and >= 0, got " + std::to_string(v));
  };
  check(model_kd, "lambda1");
  check(affective_kd, "lambda2");
  check(reconstruction, "lambda3");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

// ---- losses -----------------------------------------------------------------

namespace {

double clamp_score(double s) { return std::clamp(s, kScoreClamp, 1.0 - kScoreClamp); }

void require_targets(const Matrix& scores, const Matrix& targets, const Matrix& mask) {
  if (!scores.same_shape(targets) || !scores.same_shape(mask))
    throw ShapeError("bce: scores " + scores.shape_string() + ", targets " +
                     targets.shape_string() + ", mask " + mask.shape_string());
}

}  // namespace

double bce_loss(const Matrix& scores, const Matrix& targets, const Matrix& mask) {
  require_targets(scores, targets, mask);
  if (scores.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double m = mask.values()[i];
    if (m == 0.0) continue;
    const double s = clamp_score(scores.values()[i]);
    const double y = targets.values()[i];
    total -= m * (y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
  }
  return total / static_cast<double>(scores.rows());
}

double bce_loss(const Matrix& scores, const Matrix& targets) {
  Matrix mask(scores.rows(), scores.cols(), 1.0);
  return bce_loss(scores, targets, mask);
}

namespace ad {

Var bce(Var scores, const Matrix& targets, const Matrix& mask) {
  const Matrix& s = scores.value();
  const double value = bce_loss(s, targets, mask);
  const Var parents[] = {scores};
  return scores.tape->push(Matrix(1, 1, value), parents,
                           [scores, targets, mask](Tape& tp, const Matrix& g) {
                             const Matrix& sv = scores.value();
                             Matrix grad(sv.rows(), sv.cols());
                             const double scale = g(0, 0) / static_cast<double>(sv.rows());
                             for (std::size_t i = 0; i < sv.size(); ++i) {
                               const double raw = sv.values()[i];
                               // The clamp is flat outside its range.
                               if (raw < kScoreClamp || raw > 1.0 - kScoreClamp) continue;
                               const double y = targets.values()[i];
                               grad.values()[i] =
                                   scale * mask.values()[i] * ((1.0 - y) / (1.0 - raw) - y / raw);
                             }
                             tp.accumulate(scores.id, grad);
                           });
}

LossReport LossTerms::report() const {
  LossReport r;
  r.ce = ce.scalar();
  if (has_model_kd) r.kd_model = kd_model.scalar();
  if (has_affective_kd) r.kd_affective = kd_affective.scalar();
  if (has_reconstruction) r.reconstruction = reconstruction.scalar();
  r.total = total.scalar();
  return r;
}

LossTerms total_loss(const BoundModel& bound, const Batch& batch, const Matrix* teacher_rsm,
                     const LossWeights& weights) {
  Tape& tape = *bound.nodes.tape;
  const ForwardPass f = forward(bound, tape.constant(batch.features));
  LossTerms t;
  t.ce = bce(f.scores, batch.targets, batch.mask);
  t.total = t.ce;
  std::optional<Var> student;
  auto student_rsm = [&] {
    if (!student) student = rsm(f.latent);
    return *student;
  };
  if (teacher_rsm != nullptr && weights.model_kd > 0.0) {
    t.kd_model = rkd_loss(student_rsm(), *teacher_rsm);
    t.has_model_kd = true;
    t.total = add(t.total, scale(t.kd_model, weights.model_kd));
  }
  if (weights.affective_kd > 0.0) {
    if (batch.affective.rows() != batch.features.rows())
      throw ShapeError("total_loss: affective batch has " + std::to_string(batch.affective.rows()) +
                       " rows for " + std::to_string(batch.features.rows()) + " instances");
    t.kd_affective = rkd_loss(student_rsm(), aesl::rsm(batch.affective, RsmSource::kAffective).values);
    t.has_affective_kd = true;
    t.total = add(t.total, scale(t.kd_affective, weights.affective_kd));
  }
  if (weights.reconstruction > 0.0) {
    t.reconstruction = reconstruction_loss(f.embeddings, with_self_loops(bound.adjacency.value()));
    t.has_reconstruction = true;
    t.total = add(t.total, scale(t.reconstruction, weights.reconstruction));
  }
  return t;
}

}  // namespace ad

namespace {

Matrix teacher_latent_rsm(const AeslModel& teacher, const Matrix& features) {
  return rsm(latent_features(teacher, features), RsmSource::kOldModel).values;
}

}  // namespace

LossReport total_loss(const AeslModel& model, const Batch& batch, const AeslModel* teacher,
                      const LossWeights& weights) {
  ad::Tape tape;
  const BoundModel bound = bind(tape, model, false);
  std::optional<Matrix> teacher_rsm;
  if (teacher != nullptr && weights.model_kd > 0.0)
    teacher_rsm = teacher_latent_rsm(*teacher, batch.features);
  return ad::total_loss(bound, batch, teacher_rsm ? &*teacher_rsm : nullptr, weights).report();
}

// ---- soft labels and growth ---------------------------------------------------

Matrix compute_soft_labels(const AeslModel& teacher, const TaskDataset& data,
                           const TrainConfig& config) {
  Matrix raw = score(teacher, data.features);
  if (config.old_targets != OldTargets::kPropagated || config.beta == 0.0) return raw;
  const double sigma = config.sigma.value_or(median_pairwise_distance(data.features));
  const PropagationState state = make_propagation_state(data.features, sigma, config.beta);
  return propagate_labels(state, raw, config.propagation);
}

void grow_model(AeslModel& model, const TaskDataset& data, const Matrix* soft_old) {
  const std::size_t old = model.label_count();
  const std::size_t added = data.label_ids.size();
  for (int id : data.label_ids)
    if (std::find(model.graph.labels.begin(), model.graph.labels.end(), id) !=
        model.graph.labels.end())
      throw Error("grow_model: label " + std::to_string(id) + " already belongs to the model");

  const RelationGraph block = cooccurrence_adjacency(data.labels, data.label_ids);
  CrossBlocks cross{Matrix(old, added), Matrix(added, old)};
  if (soft_old != nullptr && old > 0) cross = complete_blocks(*soft_old, data.labels);
  model.graph = augment(model.graph, cross, block);

  const auto tag = static_cast<std::uint64_t>(model.task_index);
  model.nodes = grow_nodes(model.nodes, added, derive_seed(model.seed, 1000 + tag));
  model.head = expand_head(model.head, added, derive_seed(model.seed, 2000 + tag));
}

TaskTargets mixed_targets(const TaskDataset& data, std::size_t old_labels, const Matrix* soft_old) {
  const std::size_t n = data.size();
  TaskTargets t;
  if (soft_old != nullptr && (soft_old->rows() != n || soft_old->cols() != old_labels))
    throw ShapeError("mixed_targets: soft labels " + soft_old->shape_string() + " for " +
                     std::to_string(n) + " instances and " + std::to_string(old_labels) +
                     " old labels");
  const Matrix old_part = soft_old != nullptr ? *soft_old : Matrix(n, old_labels);
  const Matrix old_mask(n, old_labels, soft_old != nullptr ? 1.0 : 0.0);
  t.targets = hconcat(old_part, data.labels);
  t.mask = hconcat(old_mask, Matrix(n, data.labels.cols(), 1.0));
  // hconcat passes empty operands through; keep the row count when n > 0 but
  // both blocks are zero-width.
  if (t.targets.rows() != n) t.targets = Matrix(n, old_labels + data.labels.cols());
  return t;
}

// ---- training loop ------------------------------------------------------------

namespace {

void check_finite(const LossReport& r, std::size_t task, std::size_t epoch) {
  const std::pair<double, const char*> parts[] = {{r.ce, "L_ce"},
                                                  {r.kd_model, "L_kd_model"},
                                                  {r.kd_affective, "L_kd_aff"},
                                                  {r.reconstruction, "L_le"}};
  for (const auto& [v, name] : parts)
    if (!std::isfinite(v))
      throw DivergenceError("loss component " + std::string(name) + " is non-finite at task " +
                                std::to_string(task) + ", epoch " + std::to_string(epoch),
                            name);
}

void accumulate(LossReport& acc, const LossReport& r) {
  acc.ce += r.ce;
  acc.kd_model += r.kd_model;
  acc.kd_affective += r.kd_affective;
  acc.reconstruction += r.reconstruction;
  acc.total += r.total;
}

}  // namespace

AeslModel train_task(AeslModel model, const TaskDataset& data, const TrainConfig& config,
                     const TrainHooks& hooks) {
  config.weights.validate();
  data.validate();
  const std::size_t task = static_cast<std::size_t>(model.task_index);

  std::optional<AeslModel> teacher;
  if (model.label_count() > 0) teacher = model;
  std::optional<Matrix> soft;
  if (teacher && config.old_targets != OldTargets::kNone)
    soft = compute_soft_labels(*teacher, data, config);

  const std::size_t old_labels = model.label_count();
  grow_model(model, data, soft ? &*soft : nullptr);
  const TaskTargets targets = mixed_targets(data, old_labels, soft ? &*soft : nullptr);

  AdamState adam{config.adam, 0, {}, {}};
  Rng rng(derive_seed(model.seed, 3000 + task));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch_size = std::max<std::size_t>(config.batch_size, 1);
  const bool need_teacher_rsm = teacher && config.weights.model_kd > 0.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossReport epoch_loss;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t count = std::min(batch_size, order.size() - begin);
      if (count < kMinRsmBatch) continue;
      const std::span<const std::size_t> rows(order.data() + begin, count);
      Batch batch{data.features.select_rows(rows), targets.targets.select_rows(rows),
                  targets.mask.select_rows(rows), data.affective.select_rows(rows)};
      if (hooks.extend_batch) hooks.extend_batch(batch);

      std::optional<Matrix> teacher_rsm;
      if (need_teacher_rsm) teacher_rsm = teacher_latent_rsm(*teacher, batch.features);

      ad::Tape tape;
      const BoundModel bound = bind(tape, model, true);
      const ad::LossTerms terms =
          ad::total_loss(bound, batch, teacher_rsm ? &*teacher_rsm : nullptr, config.weights);
      const LossReport report = terms.report();
      check_finite(report, task, epoch);
      tape.backward(terms.total);

      std::vector<Matrix> grads;
      grads.reserve(bound.parameters.size());
      for (ad::Var p : bound.parameters) grads.push_back(p.grad());
      const std::vector<Matrix*> params = model.parameters();
      adam_step(adam, params, grads);
      accumulate(epoch_loss, report);
      ++batches;
    }
    if (hooks.on_epoch && batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      epoch_loss = {epoch_loss.ce * inv, epoch_loss.kd_model * inv, epoch_loss.kd_affective * inv,
                    epoch_loss.reconstruction * inv, epoch_loss.total * inv};
      hooks.on_epoch(epoch, epoch_loss);
    }
  }
  ++model.task_index;
  return model;
}

// ---- protocol -----------------------------------------------------------------

RelationGraph restrict_graph(const RelationGraph& oracle, const std::vector<int>& labels) {
  std::vector<std::size_t> pos;
  for (int id : labels) {
    auto it = std::find(oracle.labels.begin(), oracle.labels.end(), id);
    if (it == oracle.labels.end())
      throw Error("restrict_graph: label " + std::to_string(id) + " missing from oracle");
    pos.push_back(static_cast<std::size_t>(it - oracle.labels.begin()));
  }
  RelationGraph g{labels, Matrix(labels.size(), labels.size())};
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < pos.size(); ++j) g.adjacency(i, j) = oracle.adjacency(pos[i], pos[j]);
  return g;
}

ProtocolResult run_protocol(const TaskStream& stream, AeslModel model, const TaskFn& train,
                            const RelationGraph* oracle) {
  std::set<int> seen;
  for (std::size_t b = 0; b < stream.tasks(); ++b)
    for (int id : stream.classes[b])
      if (!seen.insert(id).second)
        throw Error("run_protocol: label " + std::to_string(id) + " appears in more than one task");

  ProtocolResult out{{}, std::move(model), {}};
  for (std::size_t b = 0; b < stream.tasks(); ++b) {
    out.model = train(std::move(out.model), stream.train[b], b);
    const TaskDataset& test = stream.test[b];
    StepRecord rec = evaluate_step(b, score(out.model, test.features), test.labels);
    if (oracle != nullptr && out.model.label_count() >= 2) {
      try {
        rec.erg_pcc = erg_pcc(out.model.graph, restrict_graph(*oracle, out.model.graph.labels));
      } catch (const DomainError&) {
        // Undefined when either graph is constant off the diagonal.
      }
    }
    out.metrics.steps.push_back(rec);
    out.graphs.push_back(out.model.graph);
  }
  return out;
}

}  // namespace aesl
