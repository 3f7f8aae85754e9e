#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lymebench/folds.hpp"
#include "lymebench/manifest.hpp"
#include "lymebench/metrics.hpp"
#include "lymebench/transfer.hpp"

namespace lymebench::store {

struct StrategySpec {
  transfer::Strategy strategy = transfer::Strategy::IMG_WFT;
  int unfreeze_depth = -1;      // fixed U
  std::vector<int> depth_grid;  // or a candidate grid searched on fold 0

  bool needs_search() const { return !depth_grid.empty(); }
};

// Declarative experiment description: flat key = value lines, '#' comments.
struct RunConfig {
  int schema_version = 1;
  fs::path dataset_root;
  fs::path manifest_path;  // alternative to dataset_root: a prepared manifest
  fs::path intermediate_root;
  std::vector<std::string> backbones;
  std::vector<StrategySpec> strategies;
  int k = 5;
  uint64_t seed = 0;
  double val_fraction = 0.10;
  int dedup_threshold = 0;
  fs::path output_dir = "results";
  fs::path weight_store;
  int expansion_factor = -1;  // <0 keeps the standard recipe's factor
  transfer::TrainingHyperparams hp;
  std::string raw_text;  // exact file bytes; the run id hashes these

  void validate() const;
};

RunConfig parse_runconfig_text(const std::string& text);
RunConfig parse_runconfig(const fs::path& path);

// Short content hash of (config bytes, seed): the run's directory name.
std::string run_id(const RunConfig& cfg);

// strategy spec syntax: NAME | NAME:U=<n> | NAME:grid=<n>;<n>;...
StrategySpec parse_strategy_spec(const std::string& text);
std::string strategy_spec_string(const StrategySpec& spec);

struct RunOutcome {
  std::string config_name;
  int fold = -1;
  bool ok = false;
  std::string error;
};

struct TrainSummary {
  fs::path run_root;
  std::vector<RunOutcome> outcomes;
  bool all_ok = true;
};

// Full fan-out: ingest/load manifest, folds, per-fold augmentation, one run
// per (backbone x strategy x fold), artifacts + summaries on disk. Failed
// runs leave an error record and do not stop the sweep.
TrainSummary execute_run(const RunConfig& cfg);

// Per-run artifact writers (runs/<config>/<fold>/).
void write_run_artifacts(const fs::path& run_dir, const transfer::TrainedModel& tm,
                         const PredictionSet& test_predictions);

void write_history_csv(const fs::path& path, const std::vector<nn::EpochRecord>& history);
std::vector<nn::EpochRecord> read_history_csv(const fs::path& path);
void write_phases_json(const fs::path& path, const transfer::TrainedModel& tm);

// Rebuilds summary.json, summary_accuracy.csv, the CD diagram, the metric
// tables, complexity.csv and the bubble chart purely from the run
// directories. Deterministic: regenerating after deletion is byte-identical.
void regenerate_summaries(const fs::path& run_root);

}  // namespace lymebench::store
