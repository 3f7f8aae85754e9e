#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lymebench/common.hpp"

namespace lymebench {

struct ConfusionMatrix {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

struct Prediction {
  std::string id;
  int true_label = 0;  // 1 = positive (EM), 0 = negative (Confuser)
  double score = 0.0;  // sigmoid output in [0, 1]
};

struct PredictionSet {
  std::vector<Prediction> entries;
  double threshold = 0.5;

  void validate() const;  // ids unique, scores in [0,1], labels binary
};

struct RocPoint {
  double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

// The eleven scalar measures plus the confusion matrix and ROC curve.
// Likelihood ratios carry no value when their denominator vanishes
// (specificity 1 for LR+, 0 for LR-); they serialize as null.
struct MetricReport {
  ConfusionMatrix cm;
  double accuracy = 0, sensitivity = 0, specificity = 0, precision = 0, npv = 0;
  double mcc = 0, kappa = 0, f1 = 0, auc = 0;
  double kappa_po = 0, kappa_pe = 0;  // observed / chance agreement behind kappa
  std::optional<double> lr_pos, lr_neg;
  std::vector<RocPoint> roc;
};

struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;
  int n = 0;  // folds contributing (can be < k for flagged-undefined LR values)
};

struct FoldAggregate {
  int k = 0;
  std::vector<std::pair<std::string, MeanStd>> metrics;  // fixed metric order

  const MeanStd* find(const std::string& name) const;
};

// Canonical metric key order used in every table and summary file.
const std::vector<std::string>& metric_names();

ConfusionMatrix compute_confusion(const PredictionSet& p);

// Scalar metrics only (no ROC); degenerate denominators produce the
// documented sentinels, never a crash.
MetricReport compute_metric_report(const ConfusionMatrix& cm);

// ROC points over descending distinct score thresholds plus trapezoidal AUC
// (equal to the pairwise rank statistic with ties counted 1/2).
std::pair<std::vector<RocPoint>, double> compute_roc_auc(const PredictionSet& p);

// Convenience: confusion + scalars + ROC in one report.
MetricReport evaluate_predictions(const PredictionSet& p);

// Mean and sample (k-1) standard deviation per metric across folds.
// LR metrics average the per-fold ratios over the folds where they exist.
FoldAggregate aggregate_folds(const std::vector<MetricReport>& reports);

double metric_value(const MetricReport& r, const std::string& name, bool* defined = nullptr);

void write_metrics_json(const fs::path& path, const MetricReport& r);
MetricReport read_metrics_json(const fs::path& path);
void write_roc_csv(const fs::path& path, const std::vector<RocPoint>& roc);

void write_predictions_csv(const fs::path& path, const PredictionSet& p);
PredictionSet read_predictions_csv(const fs::path& path);

}  // namespace lymebench
