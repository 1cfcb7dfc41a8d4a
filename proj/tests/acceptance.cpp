// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <future>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gradient_suite.hpp"
#include "helpers.hpp"

#include "aesl/baselines.hpp"
#include "aesl/evaluation.hpp"
#include "aesl/relation_graph.hpp"
#include "aesl/runner.hpp"
#include "aesl/semantics.hpp"

#ifndef AESL_SOURCE_DIR
#define AESL_SOURCE_DIR "."
#endif

using aesl::Matrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3f", x);
  return s;
}

/// Runs f(0..n-1) on up to hardware_concurrency threads; results by index.
template <class T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> running;
  for (std::size_t i = 0; i < n; ++i) {
    if (running.size() >= workers) {
      running.front().get();
      running.erase(running.begin());
    }
    running.push_back(std::async(std::launch::async, [&, i] { out[i] = f(i); }));
  }
  for (auto& r : running) r.get();
  return out;
}

bool same_state(const aesl::AeslModel& a, const aesl::AeslModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return a.nodes.values == b.nodes.values && a.graph.adjacency == b.graph.adjacency &&
         a.graph.labels == b.graph.labels && a.task_index == b.task_index;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Full-size training settings shared by the stream experiments.
aesl::RunConfig stream_config(std::uint64_t data_seed, std::size_t increment) {
  aesl::RunConfig c;
  aesl::GeneratorConfig g;
  g.seed = data_seed;
  g.n_train = 600;
  g.n_test = 300;
  g.labels = 20;
  c.generate = g;
  c.base = 0;
  c.increment = increment;
  c.train.epochs = 30;
  c.train.batch_size = 64;
  c.train.adam.lr = 1e-3;
  c.train.weights = {1.0, 0.5, 1.0};
  c.train.sigma = 2.0;
  return c;
}

// ---- criteria -----------------------------------------------------------------

Outcome nemenyi() {
  const double cd = aesl::nemenyi_cd(3.102, 9, 7);
  return {std::abs(cd - 4.540) <= 1e-3, "CD = " + fmt("%.6f", cd)};
}

Outcome gradients() {
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = testing::make_gradient_case(1000 + seed);
    for (auto term : {testing::Term::kCe, testing::Term::kReconstruction,
                      testing::Term::kAffectiveKd, testing::Term::kModelKd,
                      testing::Term::kTotal}) {
      const double e = testing::max_gradient_error(g, term);
      if (e > worst) {
        worst = e;
        where = testing::term_name(term);
      }
    }
  }
  return {worst <= 1e-4, "max relative error " + fmt("%.2e", worst) + " (" + where + ")"};
}

Outcome propagation() {
  aesl::Rng rng(2024);
  aesl::PropagationOptions tight;
  tight.tolerance = 1e-11;
  double worst = 0.0;
  for (double beta : {0.0, 0.5, 0.95})
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix x = testing::random_matrix(20, 3, rng);
      const Matrix f0 = testing::random_matrix(20, 4, rng, 0.0, 1.0);
      const auto st = aesl::make_propagation_state(x, aesl::median_pairwise_distance(x), beta);
      const Matrix lhs = Matrix::identity(20) - beta * st.propagation.transposed();
      const Matrix closed = (1.0 - beta) * aesl::solve(lhs, f0);
      worst = std::max(worst, aesl::max_abs_diff(aesl::propagate_labels(st, f0, tight), closed));
    }
  const Matrix x{{0.3, -1.0}, {0.3, -1.0}};
  tight.tolerance = 1e-12;
  const Matrix hand = aesl::propagate_labels(aesl::make_propagation_state(x, 1.0, 0.95),
                                             Matrix{{1.0}, {0.0}}, tight);
  const double hand_err = std::max(std::abs(hand(0, 0) - 0.525), std::abs(hand(1, 0) - 0.475));
  return {worst <= 1e-8 && hand_err <= 1e-10,
          "closed-form gap " + fmt("%.2e", worst) + ", hand case [" + fmt("%.6f", hand(0, 0)) +
              "; " + fmt("%.6f", hand(1, 0)) + "]"};
}

Outcome augmentation() {
  aesl::GeneratorConfig gc;
  gc.seed = 11;
  const auto gen = aesl::generate(gc);
  const auto& ds = gen.dataset;
  const auto stream = aesl::make_stream(ds, {20, 0, 5}, aesl::TaskMembership::kAllInstances);
  auto model = aesl::make_model(ds.train.features.cols(), {}, 11);
  double bayes = 0.0;
  for (std::size_t t = 0; t < stream.tasks(); ++t) {
    const auto& task = stream.train[t];
    // Oracle soft labels: the true old-class labels of the task's instances.
    const std::size_t old = model.label_count();
    const Matrix soft = old > 0 ? ds.train.labels.col_block(0, old) : Matrix();
    if (old > 0) {
      const auto cb = aesl::complete_blocks(soft, task.labels);
      for (std::size_t i = 0; i < old; ++i) {
        double mass = 0.0;
        for (std::size_t r = 0; r < soft.rows(); ++r) mass += soft(r, i);
        for (std::size_t j = 0; j < task.labels.cols(); ++j) {
          double nj = 0.0;
          for (std::size_t r = 0; r < task.size(); ++r) nj += task.labels(r, j);
          const double lhs = cb.new_old(j, i) * mass, rhs = cb.old_new(i, j) * nj;
          bayes = std::max(bayes, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        }
      }
    }
    aesl::grow_model(model, task, old > 0 ? &soft : nullptr);
    ++model.task_index;
  }
  const auto full = aesl::cooccurrence_adjacency(ds.train.labels, ds.train.label_ids);
  const double gap = aesl::max_abs_diff(model.graph.adjacency, full.adjacency);
  return {gap <= 1e-12 && bayes <= 1e-15 && model.graph.labels == full.labels,
          "block vs full co-occurrence " + fmt("%.2e", gap) + ", Bayes identity " +
              fmt("%.2e", bayes)};
}

Outcome erg_quality() {
  const std::size_t seeds = 5;
  // Index i < seeds: RKD on; i ≥ seeds: both relation terms off.
  const auto pcc = parallel_map<double>(2 * seeds, [&](std::size_t i) {
    const std::uint64_t seed = i % seeds;
    aesl::RunConfig c = stream_config(seed, 4);
    if (i >= seeds) {
      c.train.weights.model_kd = 0.0;
      c.train.weights.affective_kd = 0.0;
    }
    const auto data = aesl::load_data(c);
    const auto r = aesl::run_method(data, c, aesl::Method::kAesl, seed);
    return r.metrics.last().erg_pcc.value_or(-1.0);
  });
  const std::vector<double> on(pcc.begin(), pcc.begin() + seeds);
  const std::vector<double> off(pcc.begin() + seeds, pcc.end());
  const double m_on = median(on), m_off = median(off);
  return {m_on >= 0.6 && m_on >= m_off,
          "median PCC with RKD " + fmt("%.4f", m_on) + " [" + join(on) + "], without " +
              fmt("%.4f", m_off) + " [" + join(off) + "]"};
}

Outcome forgetting() {
  aesl::RunConfig c = aesl::load_run_config(fs::path(AESL_SOURCE_DIR) / "configs" / "demo.json");
  const auto data = aesl::load_data(c);
  const aesl::Method methods[] = {aesl::Method::kAesl, aesl::Method::kFinetune,
                                  aesl::Method::kUpperBound};
  const std::size_t seeds = 5;
  const auto last = parallel_map<double>(3 * seeds, [&](std::size_t i) {
    return aesl::run_method(data, c, methods[i / seeds], i % seeds).metrics.last().map;
  });
  auto pick = [&](std::size_t m) {
    return std::vector<double>(last.begin() + m * seeds, last.begin() + (m + 1) * seeds);
  };
  const double a = median(pick(0)), f = median(pick(1)), u = median(pick(2));
  return {a >= f + 0.05 && u >= a,
          "median last mAP: AESL " + fmt("%.4f", a) + " [" + join(pick(0)) + "], Finetune " +
              fmt("%.4f", f) + " [" + join(pick(1)) + "], Upper " + fmt("%.4f", u) + " [" +
              join(pick(2)) + "]"};
}

Outcome metric_oracles() {
  aesl::Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix s = testing::random_matrix(10, 6, rng, 0.0, 1.0);
    Matrix y = testing::random_binary(10, 6, rng, 0.4);
    y(static_cast<std::size_t>(trial) % 10, 0) = 1.0;
    worst = std::max({worst, std::abs(aesl::mean_ap(s, y) - testing::brute_map(s, y)),
                      std::abs(aesl::macro_f1(s, y) - testing::brute_macro_f1(s, y)),
                      std::abs(aesl::micro_f1(s, y) - testing::brute_micro_f1(s, y))});
  }
  const double ap = aesl::average_precision(std::vector<double>{0.9, 0.8, 0.7},
                                            std::vector<double>{1, 0, 1});
  return {worst <= 1e-10 && std::abs(ap - 5.0 / 6.0) <= 1e-15,
          "max gap " + fmt("%.2e", worst) + ", AP hand case " + fmt("%.15f", ap)};
}

Outcome structural() {
  std::vector<std::string> failed;
  aesl::Rng rng(8);

  // Permutation equivariance of the encoder.
  {
    const std::size_t dims[] = {5, 7, 6};
    const auto enc = aesl::make_gin_encoder(dims, rng);
    const std::size_t k = 9;
    const aesl::NodeFeatures h{5, testing::random_matrix(k, 5, rng)};
    Matrix a = testing::random_matrix(k, k, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < k; ++i) a(i, i) = 0.0;
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix pa(k, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) pa(i, j) = a(perm[i], perm[j]);
    const Matrix out = aesl::gin_forward(h, a, enc).values.select_rows(perm);
    const Matrix pout = aesl::gin_forward({5, h.values.select_rows(perm)}, pa, enc).values;
    if (aesl::max_abs_diff(out, pout) > 1e-10) failed.push_back("equivariance");
  }
  // Growth keeps old state bit for bit.
  {
    const auto head = aesl::expand_head(aesl::make_head(6), 4, 1);
    const auto grown = aesl::expand_head(head, 3, 2);
    if (!(grown.weight.col_block(0, 4) == head.weight && grown.bias.col_block(0, 4) == head.bias))
      failed.push_back("expand_head");
    const auto nodes = aesl::grow_nodes({8, Matrix(0, 8)}, 4, 3);
    const auto more = aesl::grow_nodes(nodes, 5, 4);
    if (!(more.values.select_rows(std::vector<std::size_t>{0, 1, 2, 3}) == nodes.values))
      failed.push_back("grow_nodes");
    const aesl::RelationGraph old{{0, 1, 2}, testing::random_matrix(3, 3, rng, 0.0, 1.0)};
    const aesl::RelationGraph fresh{{3, 4}, testing::random_matrix(2, 2, rng, 0.0, 1.0)};
    const auto g = aesl::augment(old, {testing::random_matrix(3, 2, rng, 0, 1),
                                       testing::random_matrix(2, 3, rng, 0, 1)}, fresh);
    bool kept = true;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) kept = kept && g.adjacency(i, j) == old.adjacency(i, j);
    if (!kept) failed.push_back("augment");
  }
  // Checkpoints and whole experiments.
  {
    const fs::path dir = fs::temp_directory_path() / "aesl_acceptance_structural";
    fs::remove_all(dir);
    aesl::RunConfig c = stream_config(5, 4);
    c.generate->n_train = 200;
    c.generate->n_test = 100;
    c.train.epochs = 3;
    c.methods = {aesl::Method::kAesl, aesl::Method::kFinetune, aesl::Method::kRs};
    c.seeds = {0, 1};
    c.output = dir / "a";
    const auto first = aesl::run_experiment(c);
    c.output = dir / "b";
    c.jobs = 4;
    const auto second = aesl::run_experiment(c);

    aesl::save_checkpoint(first[0].result.model, dir / "ckpt");
    if (!same_state(aesl::load_checkpoint(dir / "ckpt"), first[0].result.model))
      failed.push_back("checkpoint");
    bool same = first.size() == second.size();
    for (std::size_t i = 0; same && i < first.size(); ++i)
      same = same_state(first[i].result.model, second[i].result.model);
    same = same && slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv") &&
           slurp(dir / "a" / "runs" / "aesl_seed1" / "model.bin") ==
               slurp(dir / "b" / "runs" / "aesl_seed1" / "model.bin");
    if (!same) failed.push_back("end-to-end determinism");
    fs::remove_all(dir);
  }
  std::string detail = failed.empty() ? "all invariants hold" : "violated:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

Outcome reductions() {
  std::vector<std::string> failed;
  aesl::RunConfig c = stream_config(9, 5);
  c.train.epochs = 4;
  const auto data = aesl::load_data(c);

  aesl::RunConfig off = c;
  off.train.weights = {0.0, 0.0, 0.0};
  off.train.old_targets = aesl::OldTargets::kNone;
  const auto ft = aesl::run_method(data, c, aesl::Method::kFinetune, 3);
  if (!same_state(aesl::run_method(data, off, aesl::Method::kAesl, 3).model, ft.model))
    failed.push_back("disabled AESL vs Finetune");

  aesl::RunConfig no_replay = c;
  no_replay.replay_sample = 0;
  if (!same_state(aesl::run_method(data, no_replay, aesl::Method::kEr, 3).model, ft.model))
    failed.push_back("empty replay vs Finetune");
  no_replay.replay_capacity = 0;
  no_replay.replay_sample.reset();
  if (!same_state(aesl::run_method(data, no_replay, aesl::Method::kRs, 3).model, ft.model))
    failed.push_back("zero-capacity replay vs Finetune");

  const auto stream = aesl::make_stream(data.dataset, {20, 0, 5});
  const auto teacher = aesl::finetune_task(
      aesl::make_model(data.dataset.train.features.cols(), c.model, 3), stream.train[0], c.train);
  aesl::TrainConfig beta0 = c.train;
  beta0.beta = 0.0;
  if (!(aesl::compute_soft_labels(teacher, stream.train[1], beta0) ==
        aesl::score(teacher, stream.train[1].features)))
    failed.push_back("beta = 0 soft labels");

  std::string detail = failed.empty() ? "all identities exact" : "violated:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"Nemenyi constant", nemenyi},
      {"gradient suite", gradients},
      {"label-propagation oracle", propagation},
      {"graph-augmentation exactness", augmentation},
      {"ERG reconstruction quality", erg_quality},
      {"forgetting mitigation", forgetting},
      {"metric oracles", metric_oracles},
      {"structural invariants", structural},
      {"reduction identities", reductions},
  };
  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s  (%s; %.1f s)\n", index, c.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
