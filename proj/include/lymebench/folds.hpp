#pragma once

#include <string>
#include <vector>

#include "lymebench/common.hpp"
#include "lymebench/manifest.hpp"

namespace lymebench {

struct FoldPlan {
  int k = 0;
  uint64_t seed = 0;
  std::vector<std::vector<std::string>> folds;  // k disjoint id sets covering the manifest
};

struct SplitAssignment {
  int test_fold = -1;
  double val_fraction = 0.10;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
};

// Per-class seeded shuffle, then round-robin fold assignment. Per-class fold
// counts differ by at most 1; identical (manifest, k, seed) reproduce the
// identical plan.
FoldPlan stratified_kfold(const Manifest& m, int k, uint64_t seed);

// One rotation: folds[test_fold] becomes the test set, the rest are split
// into train/val with a per-class stratified validation holdout of
// round(val_fraction * pool size) records.
SplitAssignment make_run_splits(const FoldPlan& plan, const Manifest& m, int test_fold,
                                double val_fraction, uint64_t seed);

void write_foldplan_json(const fs::path& path, const FoldPlan& plan);
FoldPlan read_foldplan_json(const fs::path& path);

void write_split_json(const fs::path& path, const SplitAssignment& split);
SplitAssignment read_split_json(const fs::path& path);

}  // namespace lymebench
