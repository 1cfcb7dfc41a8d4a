// Command-line front end: generate | run | compare | inspect-graph.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aesl/error.hpp"
#include "aesl/runner.hpp"
#include "aesl/semantics.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  std::size_t jobs = 0;
  std::vector<std::string> results;
  double alpha = 0.05;
  std::string checkpoint;
  std::string embeddings;
};

aesl::RunConfig config_with_overrides(const Options& o) {
  aesl::RunConfig c = aesl::load_run_config(o.config);
  if (!o.out.empty()) c.output = o.out;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.methods.empty()) {
    c.methods.clear();
    for (const auto& m : o.methods) c.methods.push_back(aesl::parse_method(m));
  }
  if (o.jobs > 0) c.jobs = o.jobs;
  return c;
}

int cmd_generate(const Options& o) {
  aesl::RunConfig c = aesl::load_run_config(o.config);
  if (!c.generate) throw aesl::ConfigError({"dataset.generate: required by the generate command"});
  if (!o.seeds.empty()) c.generate->seed = o.seeds.front();
  const std::filesystem::path out = o.out.empty() ? c.output : std::filesystem::path(o.out);
  aesl::GeneratedData g = aesl::generate(*c.generate);
  g.dataset.name = c.name;
  aesl::save_dataset(g.dataset, out);
  nlohmann::json oracle = g.oracle_graph;
  std::ofstream(out / "oracle_graph.json") << oracle.dump() << '\n';
  std::cout << "wrote " << (out / "manifest.json").string() << " (" << g.dataset.train.size()
            << " train, " << g.dataset.test.size() << " test, " << g.dataset.label_count()
            << " labels)\n";
  return 0;
}

int cmd_run(const Options& o) {
  const aesl::RunConfig c = config_with_overrides(o);
  aesl::run_experiment(c, &std::cout);
  std::cout << "results in " << c.output.string() << " (config hash " << aesl::config_hash(c) << ")\n";
  return 0;
}

int cmd_compare(const Options& o) {
  std::vector<std::filesystem::path> files(o.results.begin(), o.results.end());
  aesl::print_report(std::cout, aesl::compare_results(files, o.alpha));
  return 0;
}

int cmd_inspect(const Options& o) {
  const aesl::AeslModel model = aesl::load_checkpoint(o.checkpoint);
  nlohmann::json out;
  out["graph"] = model.graph;
  if (!o.config.empty()) {
    const aesl::LoadedData data = aesl::load_data(aesl::load_run_config(o.config));
    out["pcc_vs_oracle"] =
        aesl::erg_pcc(model.graph, aesl::restrict_graph(data.oracle, model.graph.labels));
  }
  std::cout << out.dump(2) << '\n';
  if (!o.embeddings.empty()) {
    std::ofstream csv(o.embeddings);
    aesl::write_embeddings_csv(csv, model.graph.labels, aesl::label_embeddings(model));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label class-incremental learning experiments"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--config", o.config, "run config with a dataset.generate block")->required();
  gen->add_option("--out", o.out, "output directory");
  gen->add_option("--seed", o.seeds, "generator seed")->delimiter(',');

  auto* run = app.add_subcommand("run", "train and evaluate every (method, seed) pair");
  run->add_option("--config", o.config, "run config (JSON)")->required();
  run->add_option("--out", o.out, "output directory");
  run->add_option("--seed", o.seeds, "seed list, e.g. 0,1,2")->delimiter(',');
  run->add_option("--method", o.methods, "method list: aesl,finetune,lwf,er,rs,upper")->delimiter(',');
  run->add_option("--jobs", o.jobs, "parallel worker slots");

  auto* cmp = app.add_subcommand("compare", "Friedman and Nemenyi tests over results files");
  cmp->add_option("results", o.results, "results.csv files, one per stream")->required();
  cmp->add_option("--alpha", o.alpha, "significance level (0.05 or 0.10)");

  auto* insp = app.add_subcommand("inspect-graph", "dump a checkpoint's relation graph");
  insp->add_option("--checkpoint", o.checkpoint, "checkpoint prefix (without .json)")->required();
  insp->add_option("--config", o.config, "run config whose dataset provides the oracle graph");
  insp->add_option("--embeddings", o.embeddings, "also write label embeddings to this CSV");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_generate(o);
    if (run->parsed()) return cmd_run(o);
    if (cmp->parsed()) return cmd_compare(o);
    return cmd_inspect(o);
  } catch (const aesl::ConfigError& e) {
    for (const auto& f : e.fields()) std::cerr << "config error: " << f << '\n';
    return kExitConfig;
  } catch (const aesl::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
