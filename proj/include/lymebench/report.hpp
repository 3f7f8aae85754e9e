#pragma once

#include <string>
#include <vector>

#include "lymebench/complexity.hpp"
#include "lymebench/manifest.hpp"
#include "lymebench/metrics.hpp"

namespace lymebench::report {

struct ConfigAggregate {
  std::string name;
  FoldAggregate aggregate;
  int folds_found = 0;
  bool complete = true;  // incomplete rows are flagged, never fabricated
};

// model x 11 metrics grid, cells "mean ± std", best value per column marked.
std::string render_metric_table_csv(const std::vector<ConfigAggregate>& rows);
std::string render_metric_table_text(const std::vector<ConfigAggregate>& rows);

struct MetricTableRow {
  std::string name;
  std::vector<std::pair<std::string, std::string>> cells;  // metric -> "mean ± std"
  std::vector<std::string> best;                           // metrics this row leads
  std::string status;                                      // complete | incomplete
};

// Inverse of render_metric_table_csv; round-trips the emitted grid.
std::vector<MetricTableRow> parse_metric_table_csv(const std::string& csv);

struct BubbleEntry {
  std::string name;
  double accuracy = 0.0;  // [0,1]
  double flops_giga = 0.0;
  double params_millions = 0.0;
};

// accuracy vs FLOPs (log x), bubble area proportional to parameters, each
// bubble labeled with its FLOPs/accuracy/params triple. The plotted data
// table rides along in the SVG metadata.
std::string render_bubble_chart_svg(const std::vector<BubbleEntry>& entries);

// Joins summary accuracies with complexity rows; models without a complexity
// entry are omitted and reported in `warnings`.
std::vector<BubbleEntry> join_bubble_entries(
    const std::vector<std::pair<std::string, double>>& accuracy_by_model,
    const std::vector<profile::ComplexityReport>& complexity,
    std::vector<std::string>* warnings);

// External-model assessment over an arbitrary manifest: the predictions file
// must cover every manifest id (missing ids are fatal and listed).
MetricReport evaluate_external_predictions(const fs::path& predictions_csv, const Manifest& m);

// Several sub-model prediction files (an ensemble): per-file reports plus the
// mean ± std aggregate.
std::pair<std::vector<MetricReport>, FoldAggregate> evaluate_external_ensemble(
    const std::vector<fs::path>& prediction_csvs, const Manifest& m);

// A trained run directory (weights + run_meta.json) applied to a manifest.
MetricReport evaluate_external_model(const fs::path& run_dir, const Manifest& m);

}  // namespace lymebench::report
