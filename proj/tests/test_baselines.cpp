#include <set>

#include "doctest.h"
#include "helpers.hpp"

#include "aesl/baselines.hpp"
#include "aesl/error.hpp"

using aesl::Matrix;

namespace {

aesl::ModelConfig small_model() {
  aesl::ModelConfig mc;
  mc.node_dim = 8;
  mc.gin_hidden = {16};
  mc.embed_dim = 16;
  mc.latent_dim = 16;
  mc.feature_dim = 8;
  return mc;
}

aesl::TaskStream small_stream(std::uint64_t seed) {
  aesl::GeneratorConfig c;
  c.seed = seed;
  c.n_train = 150;
  c.n_test = 60;
  c.labels = 6;
  c.feature_dims = 10;
  c.label_cardinality = 2.0;
  auto g = aesl::generate(c);
  aesl::standardize_affective(g.dataset);
  return aesl::make_stream(g.dataset, {6, 0, 3});
}

aesl::TrainConfig quick_config() {
  aesl::TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 32;
  tc.sigma = 2.0;
  tc.adam.lr = 1e-2;
  return tc;
}

bool identical(const aesl::AeslModel& a, const aesl::AeslModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return a.nodes.values == b.nodes.values && a.graph.adjacency == b.graph.adjacency &&
         a.task_index == b.task_index;
}

aesl::ReplayRecord record(double v, std::size_t task = 0) {
  return {{v}, {0.0}, {1.0}, {0}, task};
}

}  // namespace

TEST_CASE("reservoir fills then holds capacity") {
  aesl::ReplayBuffer buf;
  buf.capacity = 3;
  aesl::Rng rng(71);
  for (int i = 0; i < 3; ++i) aesl::reservoir_update(buf, record(i), rng);
  CHECK(buf.size() == 3);
  CHECK(buf.records[2].features[0] == 2.0);
  for (int i = 3; i < 50; ++i) aesl::reservoir_update(buf, record(i), rng);
  CHECK(buf.size() == 3);
  CHECK(buf.seen == 50);

  aesl::ReplayBuffer none;
  none.capacity = 0;
  aesl::reservoir_update(none, record(1), rng);
  CHECK(none.size() == 0);
  CHECK(none.seen == 1);
}

TEST_CASE("reservoir keeps every item with equal probability") {
  const std::size_t stream = 100, capacity = 10, trials = 4000;
  std::vector<double> hits(stream, 0.0);
  aesl::Rng rng(72);
  for (std::size_t t = 0; t < trials; ++t) {
    aesl::ReplayBuffer buf;
    buf.capacity = capacity;
    for (std::size_t i = 0; i < stream; ++i)
      aesl::reservoir_update(buf, record(static_cast<double>(i)), rng);
    for (const auto& r : buf.records) hits[static_cast<std::size_t>(r.features[0])] += 1.0;
  }
  const double expected = static_cast<double>(trials * capacity) / stream;
  double chi2 = 0.0;
  for (double h : hits) chi2 += (h - expected) * (h - expected) / expected;
  // Upper 0.001 point of χ² with 99 degrees of freedom.
  CHECK(chi2 < 148.23);
}

TEST_CASE("store_task shares the buffer across tasks") {
  const auto stream = small_stream(73);
  aesl::Rng rng(73);
  aesl::ReplayBuffer buf;
  buf.capacity = 20;
  aesl::store_task(buf, stream.train[0], 0, aesl::ReplayPolicy::kRandom, rng);
  CHECK(buf.size() == 20);
  aesl::store_task(buf, stream.train[1], 1, aesl::ReplayPolicy::kRandom, rng);
  CHECK(buf.size() == 20);
  std::size_t first = 0;
  for (const auto& r : buf.records) {
    if (r.task == 0) ++first;
    // Labels cover only the record's own task.
    CHECK(r.labels.size() == 3);
    CHECK(r.label_ids == stream.classes[r.task]);
    CHECK(r.features.size() == stream.train[0].features.cols());
  }
  CHECK(first == 10);

  aesl::ReplayBuffer res;
  res.capacity = 20;
  aesl::store_task(res, stream.train[0], 0, aesl::ReplayPolicy::kReservoir, rng);
  CHECK(res.size() == 20);
  CHECK(res.seen == stream.train[0].size());
}

TEST_CASE("finetune is train_task with every mechanism disabled") {
  const auto stream = small_stream(74);
  const auto tc = quick_config();
  auto off = tc;
  off.weights = {0.0, 0.0, 0.0};
  off.old_targets = aesl::OldTargets::kNone;

  auto a = aesl::make_model(10, small_model(), 74);
  auto b = a;
  for (std::size_t t = 0; t < stream.tasks(); ++t) {
    a = aesl::finetune_task(a, stream.train[t], tc);
    b = aesl::train_task(b, stream.train[t], off);
  }
  CHECK(identical(a, b));
}

TEST_CASE("finetune leaves old head columns untouched") {
  const auto stream = small_stream(75);
  const auto tc = quick_config();
  const auto first = aesl::finetune_task(aesl::make_model(10, small_model(), 75), stream.train[0], tc);
  const auto second = aesl::finetune_task(first, stream.train[1], tc);
  // Old columns are masked out of the loss and weight decay is off, so Adam
  // never moves them.
  for (std::size_t r = 0; r < first.head.weight.rows(); ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(second.head.weight(r, c) == first.head.weight(r, c));
  // The shared backbone does move.
  CHECK(!(second.decoupler.instance_weight == first.decoupler.instance_weight));
}

TEST_CASE("lwf ignores the propagation settings") {
  const auto stream = small_stream(76);
  auto tc = quick_config();
  const auto start = aesl::finetune_task(aesl::make_model(10, small_model(), 76), stream.train[0], tc);
  const auto a = aesl::lwf_task(start, stream.train[1], tc);
  tc.beta = 0.0;
  tc.sigma = 17.0;
  const auto b = aesl::lwf_task(start, stream.train[1], tc);
  CHECK(identical(a, b));
  CHECK(!identical(a, aesl::finetune_task(start, stream.train[1], tc)));
}

TEST_CASE("replay without samples reproduces finetune") {
  const auto stream = small_stream(77);
  const auto tc = quick_config();
  const auto start = aesl::make_model(10, small_model(), 77);

  aesl::Rng rng(1);
  aesl::ReplayBuffer empty;
  const auto a = aesl::replay_task(start, stream.train[0], empty, tc, {}, rng);
  CHECK(identical(a, aesl::finetune_task(start, stream.train[0], tc)));
  CHECK(empty.size() > 0);

  aesl::ReplayBuffer full = empty;
  const auto b = aesl::replay_task(a, stream.train[1], full, tc,
                                   {aesl::ReplayPolicy::kRandom, std::size_t{0}}, rng);
  CHECK(identical(b, aesl::finetune_task(a, stream.train[1], tc)));

  aesl::ReplayBuffer used = empty;
  const auto c = aesl::replay_task(a, stream.train[1], used, tc, {}, rng);
  CHECK(!identical(c, b));
}

TEST_CASE("replay is deterministic given its generator") {
  const auto stream = small_stream(78);
  const auto tc = quick_config();
  auto run = [&] {
    aesl::Rng rng(5);
    aesl::ReplayBuffer buf;
    buf.capacity = 40;
    auto m = aesl::make_model(10, small_model(), 78);
    for (std::size_t t = 0; t < stream.tasks(); ++t)
      m = aesl::replay_task(m, stream.train[t], buf, tc, {aesl::ReplayPolicy::kReservoir, {}}, rng);
    return m;
  };
  CHECK(identical(run(), run()));
}
