#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "aesl/error.hpp"
#include "aesl/runner.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("aesl_runner_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json tiny_json(const fs::path& out) {
  return {
      {"name", "tiny"},
      {"dataset", {{"generate", {{"seed", 3}, {"n_train", 90}, {"n_test", 45}, {"labels", 6},
                                 {"feature_dims", 10}, {"label_cardinality", 2.0}}}}},
      {"protocol", {{"base", 0}, {"increment", 3}}},
      {"methods", {"aesl", "finetune", "er"}},
      {"seeds", {0, 1}},
      {"model", {{"node_dim", 6}, {"gin_hidden", {8}}, {"embed_dim", 8}, {"latent_dim", 8},
                 {"feature_dim", 4}}},
      {"train", {{"epochs", 2}, {"batch_size", 32}, {"lr", 0.01}, {"sigma", 2.0}}},
      {"replay", {{"capacity", 30}}},
      {"output", out.string()},
  };
}

std::vector<std::string> error_fields(const nlohmann::json& j) {
  try {
    aesl::parse_run_config(j);
  } catch (const aesl::ConfigError& e) {
    return e.fields();
  }
  return {};
}

bool mentions(const std::vector<std::string>& fields, const std::string& key) {
  for (const auto& f : fields)
    if (f.find(key) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("run config parsing and validation") {
  const auto j = tiny_json("out");
  const auto c = aesl::parse_run_config(j);
  CHECK(c.name == "tiny");
  REQUIRE(c.generate.has_value());
  CHECK(c.generate->labels == 6);
  CHECK(*c.increment == 3);
  CHECK(c.methods.size() == 3);
  CHECK(c.train.sigma == 2.0);
  CHECK(c.replay_capacity == 30);

  auto missing = j;
  missing.erase("protocol");
  const auto f = error_fields(missing);
  REQUIRE(f.size() == 1);
  CHECK(f[0].rfind("protocol", 0) == 0);

  auto bad = j;
  bad["train"]["lr"] = -1.0;
  bad["train"]["batch_size"] = 2;
  bad["methods"] = {"aesl", "magic"};
  bad["colour"] = "red";
  const auto many = error_fields(bad);
  CHECK(mentions(many, "train.lr"));
  CHECK(mentions(many, "train.batch_size"));
  CHECK(mentions(many, "methods"));
  CHECK(mentions(many, "colour"));

  auto median = j;
  median["train"]["sigma"] = "median";
  CHECK(!aesl::parse_run_config(median).train.sigma.has_value());
  CHECK_THROWS_AS(aesl::parse_method("sgd"), aesl::ConfigError);
}

TEST_CASE("config hash is canonical") {
  const auto c = aesl::parse_run_config(tiny_json("a"));
  const std::string h = aesl::config_hash(c);
  CHECK(h.size() == 16);
  CHECK(aesl::config_hash(aesl::parse_run_config(aesl::to_json(c))) == h);

  auto moved = c;
  moved.output = "elsewhere";
  moved.jobs = 4;
  CHECK(aesl::config_hash(moved) == h);

  auto longer = c;
  longer.train.epochs = 3;
  CHECK(aesl::config_hash(longer) != h);
}

TEST_CASE("experiments are reproducible regardless of worker count") {
  const fs::path dir = scratch("repro");
  auto c1 = aesl::parse_run_config(tiny_json(dir / "one"));
  auto c2 = aesl::parse_run_config(tiny_json(dir / "two"));
  c2.jobs = 3;
  const auto r1 = aesl::run_experiment(c1);
  const auto r2 = aesl::run_experiment(c2);
  REQUIRE(r1.size() == 6);
  CHECK(r1[0].method == aesl::Method::kAesl);
  CHECK(r1[1].seed == 1);
  CHECK(slurp(dir / "one" / "results.csv") == slurp(dir / "two" / "results.csv"));
  CHECK(slurp(dir / "one" / "curves.csv") == slurp(dir / "two" / "curves.csv"));
  for (const char* f : {"config.json", "summary.json", "runs/aesl_seed0/erg_0.json",
                        "runs/er_seed1/erg_1.json"})
    CHECK(fs::exists(dir / "one" / f));

  const auto res = aesl::read_results(dir / "one" / "results.csv");
  CHECK(res.hash == aesl::config_hash(c1));
  CHECK(res.methods == std::vector<std::string>{"aesl", "finetune", "er"});
  CHECK(res.last_map.size() == 3);

  // A row whose hash disagrees with the header is rejected.
  std::string text = slurp(dir / "one" / "results.csv");
  const auto row = text.find('\n', text.find('\n') + 1) + 1;
  text.replace(row, 16, "0123456789abcdef");
  std::ofstream(dir / "tampered.csv") << text;
  CHECK_THROWS_AS(aesl::read_results(dir / "tampered.csv"), aesl::DataError);
  fs::remove_all(dir);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const fs::path dir = scratch("ckpt");
  auto c = aesl::parse_run_config(tiny_json(dir));
  const auto data = aesl::load_data(c);
  const auto res = aesl::run_method(data, c, aesl::Method::kAesl, 0);
  aesl::save_checkpoint(res.model, dir / "model");
  const auto back = aesl::load_checkpoint(dir / "model");
  const auto pa = res.model.parameters();
  const auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
  CHECK(back.nodes.values == res.model.nodes.values);
  CHECK(back.graph.adjacency == res.model.graph.adjacency);
  CHECK(back.graph.labels == res.model.graph.labels);
  CHECK(back.task_index == res.model.task_index);
  CHECK(back.seed == res.model.seed);
  const auto& x = data.dataset.test.features;
  CHECK(aesl::score(back, x) == aesl::score(res.model, x));

  CHECK_THROWS_AS(aesl::load_checkpoint(dir / "absent"), aesl::DataError);
  fs::resize_file(dir / "model.bin", 16);
  CHECK_THROWS_AS(aesl::load_checkpoint(dir / "model"), aesl::DataError);
  fs::remove_all(dir);
}

TEST_CASE("compare_scores statistics") {
  const std::vector<std::string> methods{"a", "b", "c"};
  const std::vector<std::string> streams{"s1", "s2"};
  const auto r = aesl::compare_scores(methods, streams, {{0.9, 0.8, 0.7}, {0.8, 0.9, 0.7}}, 0.05);
  CHECK(r.average_ranks == std::vector<double>{1.5, 1.5, 3.0});
  REQUIRE(r.friedman.has_value());
  CHECK(r.friedman->chi_square == doctest::Approx(3.0));
  CHECK(r.cd == doctest::Approx(aesl::nemenyi_cd(aesl::nemenyi_q(0.05, 3), 3, 2)));

  // Identical rankings on every stream leave F_F undefined.
  const auto same = aesl::compare_scores({"a", "b"}, streams, {{0.9, 0.1}, {0.8, 0.2}}, 0.05);
  CHECK(!same.friedman.has_value());
  std::ostringstream out;
  aesl::print_report(out, same);
  CHECK(out.str().find("degenerate") != std::string::npos);

  CHECK_THROWS(aesl::compare_scores({"a"}, streams, {{0.9}, {0.8}}, 0.05));
}
