#pragma once

// Experiment plumbing behind the command-line tool: run configuration,
// method dispatch, result files and the rank-test comparison.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aesl/baselines.hpp"
#include "aesl/data.hpp"
#include "aesl/model.hpp"
#include "aesl/trainer.hpp"

namespace aesl {

enum class Method { kAesl, kFinetune, kLwf, kEr, kRs, kUpperBound };

const char* method_name(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(const std::string& name);

struct RunConfig {
  std::string name = "run";
  std::optional<GeneratorConfig> generate;    // exactly one of generate / manifest
  std::optional<std::filesystem::path> manifest;
  std::optional<std::size_t> base;            // protocol (required)
  std::optional<std::size_t> increment;
  TaskMembership membership = TaskMembership::kAnyPositive;
  std::vector<Method> methods = {Method::kAesl, Method::kFinetune};
  std::vector<std::uint64_t> seeds = {0};
  ModelConfig model;
  TrainConfig train;
  std::size_t replay_capacity = 500;
  std::optional<std::size_t> replay_sample;
  std::filesystem::path output = "results";
  std::size_t jobs = 1;
};

/// Parses and validates; every problem is reported as one ConfigError field
/// message. Relative manifest paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// FNV-1a over the canonical JSON of the config, as 16 hex digits.
std::string config_hash(const RunConfig& c);

struct LoadedData {
  Dataset dataset;
  RelationGraph oracle;  // co-occurrence over every instance
};
LoadedData load_data(const RunConfig& c);

/// One (method, seed) run over the configured protocol.
ProtocolResult run_method(const LoadedData& data, const RunConfig& c, Method method,
                          std::uint64_t seed);

struct RunOutcome {
  Method method;
  std::uint64_t seed;
  ProtocolResult result;
};

/// Executes every (method, seed) pair with `c.jobs` workers and writes
/// config.json, results.csv, curves.csv, summary.json and a per-run
/// directory with erg_{task}.json files and the final checkpoint. Returns
/// the outcomes sorted by (method order, seed).
std::vector<RunOutcome> run_experiment(const RunConfig& c, std::ostream* log = nullptr);

/// One parsed results.csv.
struct ResultsFile {
  std::string hash;
  std::string stream;  // dataset name and protocol
  std::vector<std::string> methods;
  std::vector<double> last_map;  // per method, mean over seeds
};

/// Throws DataError when the header hash and any row's hash disagree.
ResultsFile read_results(const std::filesystem::path& path);

struct CompareReport {
  std::vector<std::string> methods;
  std::vector<std::string> streams;
  std::vector<double> average_ranks;
  std::optional<FriedmanResult> friedman;  // empty when degenerate
  double critical_value = 0.0;
  double cd = 0.0;
  std::vector<std::vector<bool>> significant;  // |R_i − R_j| > CD
};

/// Friedman + Nemenyi over a streams × methods score table (higher better).
CompareReport compare_scores(const std::vector<std::string>& methods,
                             const std::vector<std::string>& streams,
                             const std::vector<std::vector<double>>& scores, double alpha);
/// Requires every file to list the same methods and at least two files.
CompareReport compare_results(const std::vector<std::filesystem::path>& files, double alpha);
void print_report(std::ostream& out, const CompareReport& r);

}  // namespace aesl
