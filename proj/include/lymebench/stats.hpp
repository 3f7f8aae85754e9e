#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lymebench/common.hpp"

namespace lymebench {

struct AccuracyMatrix {
  std::vector<std::string> models;           // m >= 2
  int folds = 0;                             // N >= 2
  std::vector<std::vector<double>> values;   // [model][fold], each in [0,1]

  void validate() const;
};

struct RankMatrix {
  std::vector<std::string> models;
  int folds = 0;
  std::vector<std::vector<double>> ranks;  // [fold][model], 1 = best, ties get mean ranks
  std::vector<double> avg_rank;            // per model, mean over folds
};

struct CDResult {
  double friedman_statistic = 0.0;
  double friedman_p = 1.0;
  double alpha = 0.1;
  double critical_difference = 0.0;
  // index pairs (i < j) into RankMatrix::models with |avg_rank_i - avg_rank_j| < CD
  std::vector<std::pair<size_t, size_t>> pairwise_not_different;
};

// Higher accuracy -> lower rank number; equal accuracies share the mean rank.
RankMatrix rank_models(const AccuracyMatrix& a);

// Tie-corrected Friedman chi-square statistic. The p-value is the exact
// within-fold permutation tail when the design is small enough to enumerate
// (m <= 6, N <= 12); larger designs use the chi-square survival function
// with m-1 degrees of freedom. Degenerate no-variation inputs give (0, 1).
std::pair<double, double> friedman_test(const RankMatrix& r);

// CD = q_alpha(m) * sqrt(m(m+1) / (6N)) with the embedded q table
// (alpha in {0.05, 0.10}, m <= 30).
CDResult nemenyi_cd(const RankMatrix& r, double alpha = 0.1);

// q_alpha(m): infinite-df studentized range quantile divided by sqrt(2).
double nemenyi_q(double alpha, int m);

// Survival function of the chi-square distribution (upper tail).
double chi2_sf(double x, double df);

// Deterministic SVG: models on a rank axis ordered best to worst, average
// ranks annotated, CD bar to scale, thick bars spanning the maximal cliques
// of mutually not-different models.
std::string render_cd_diagram(const RankMatrix& r, const CDResult& cd);

// Maximal groups (as index ranges into the rank-sorted order) whose members
// are pairwise not significantly different; no group is a subset of another.
std::vector<std::vector<size_t>> cd_cliques(const RankMatrix& r, const CDResult& cd);

AccuracyMatrix read_accuracy_csv(const fs::path& path);     // model,fold,accuracy
void write_accuracy_csv(const fs::path& path, const AccuracyMatrix& a);
void write_cd_result_json(const fs::path& path, const RankMatrix& r, const CDResult& cd);

}  // namespace lymebench
