#pragma once

#include "disc/conceptbank.hpp"
#include "disc/io.hpp"
#include "disc/metrics.hpp"
#include "disc/synthdata.hpp"
#include "disc/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace disc {

struct BankSpec {
  double image_noise = 0.0;
  int n_pos = 150;
  int n_neg = 150;
  std::vector<int> allowlist;  // empty: every concept
  double svm_lambda = 1e-2;
  int svm_epochs = 200;
};

struct EvalConfig {
  Index test_size = 10000;
  Index validation_size = 0;  // 0: no validation set, no early stopping
  std::vector<std::uint64_t> seeds{0};
  bool strict_paper_error_formula = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  BankSpec bank;
  TrainConfig train;
  EvalConfig eval;
  std::string output_dir = "runs";

  void validate() const;
};

/// Strict parse: unknown keys and type mismatches raise ConfigError naming the key path.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const fs::path& path);
/// Every field, defaults included.
Json config_to_json(const ExperimentConfig& config);

/// Parses "A..B" (inclusive) or a comma list.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);
std::vector<Method> parse_methods(const std::string& text);

struct DataBundle {
  GammaPatterns patterns;
  LabeledDataset train;
  LabeledDataset test;
  std::optional<LabeledDataset> validation;
};

/// Named substreams of the run seed: "patterns", "data", "validation", "eval".
DataBundle make_data(const ExperimentConfig& config, std::uint64_t seed);
ConceptBank make_bank(const ExperimentConfig& config);

/// Writes train.csv, test.csv, [validation.csv], patterns.json, bank.json, resolved_config.json.
void write_data_bundle(const fs::path& dir, const ExperimentConfig& config, const DataBundle& data);
DataBundle read_data_bundle(const fs::path& dir);

/// Derives the trainer seed from the run seed.
std::uint64_t train_seed(std::uint64_t run_seed);

struct RunOutcome {
  TrainReport report;
  GroupMetrics test;
  double empirical_test_error = 0.0;
  std::optional<double> theoretical_test_error;  // identity encoder with one output
  std::optional<Vector> theta;
  Json summary;  // contents of report.json
};

RunOutcome run_experiment(const ExperimentConfig& config, Method method, std::uint64_t seed,
                          const DataBundle& data);

/// Writes resolved_config.json, metrics.csv, sensitivity.csv (when measured),
/// report.json, seed, model.json, clusters.csv and cavs.csv (DISC variants).
void write_run_directory(const fs::path& dir, const ExperimentConfig& config, std::uint64_t seed,
                         const RunOutcome& outcome, const ConceptBank& bank);

/// One run per (method, seed) under out/<method>_seed<seed>, then summary.json.
/// Runs in parallel on up to `threads` workers.
Json run_sweep(const ExperimentConfig& config, const std::vector<Method>& methods,
               const std::vector<std::uint64_t>& seeds, const fs::path& out, unsigned threads);

/// Paired DISC-vs-ERM comparison over the run summaries of a sweep.
Json paired_comparison(const std::vector<Json>& disc_runs, const std::vector<Json>& erm_runs);

struct KSweepRow {
  int k = 0;
  double silhouette = 0.0;
  double worst_group_acc = 0.0;
};

/// DISC trained once per k; silhouette of the per-class clusterings (size-weighted).
std::vector<KSweepRow> sweep_k(const ExperimentConfig& config, std::uint64_t seed, int k_min, int k_max);

/// Aggregates every run directory below `root` into root/report/.
Json aggregate_reports(const fs::path& root);

unsigned sweep_threads_from_env();

}  // namespace disc
