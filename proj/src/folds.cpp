#include "lymebench/folds.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

namespace lymebench {

using nlohmann::json;

FoldPlan stratified_kfold(const Manifest& m, int k, uint64_t seed) {
  if (k < 2) fail("stratified_kfold: k must be >= 2");

  std::map<std::string, std::vector<std::string>> per_class;
  for (const auto& r : m.records) per_class[r.label].push_back(r.id);
  for (const auto& [cls, ids] : per_class) {
    if (ids.size() < size_t(k))
      fail("stratified_kfold: class '" + cls + "' has " + std::to_string(ids.size()) +
           " members, fewer than k=" + std::to_string(k));
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(size_t(k), {});

  // class_names order first, then any remaining labels in sorted order
  std::vector<std::string> class_order;
  for (const auto& name : m.class_names)
    if (per_class.count(name)) class_order.push_back(name);
  for (const auto& [cls, ids] : per_class)
    if (std::find(class_order.begin(), class_order.end(), cls) == class_order.end())
      class_order.push_back(cls);

  for (const auto& cls : class_order) {
    auto ids = per_class[cls];
    Rng rng(substream_seed(seed, "fold-class:" + cls));
    rng.shuffle(ids);
    for (size_t i = 0; i < ids.size(); ++i) plan.folds[i % size_t(k)].push_back(ids[i]);
  }
  return plan;
}

SplitAssignment make_run_splits(const FoldPlan& plan, const Manifest& m, int test_fold,
                                double val_fraction, uint64_t seed) {
  if (test_fold < 0 || test_fold >= plan.k)
    fail("make_run_splits: test_fold " + std::to_string(test_fold) + " out of range for k=" +
         std::to_string(plan.k));
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    fail("make_run_splits: val_fraction must be in (0, 1)");

  SplitAssignment split;
  split.test_fold = test_fold;
  split.val_fraction = val_fraction;
  split.test_ids = plan.folds[size_t(test_fold)];

  std::map<std::string, std::vector<std::string>> pool_by_class;
  size_t pool_size = 0;
  std::vector<std::string> class_order;
  for (int f = 0; f < plan.k; ++f) {
    if (f == test_fold) continue;
    for (const auto& id : plan.folds[size_t(f)]) {
      const std::string& cls = m.by_id(id).label;
      if (!pool_by_class.count(cls)) class_order.push_back(cls);
      pool_by_class[cls].push_back(id);
      ++pool_size;
    }
  }

  // Largest-remainder allocation of round(val_fraction * pool) across classes.
  const long long val_total = std::llround(val_fraction * double(pool_size));
  std::vector<long long> quota(class_order.size());
  std::vector<std::pair<double, size_t>> remainders;
  long long assigned = 0;
  for (size_t i = 0; i < class_order.size(); ++i) {
    double exact = val_fraction * double(pool_by_class[class_order[i]].size());
    quota[i] = (long long)std::floor(exact);
    assigned += quota[i];
    remainders.push_back({exact - double(quota[i]), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long long extra = val_total - assigned; extra > 0; --extra)
    ++quota[remainders[size_t((val_total - assigned) - extra) % remainders.size()].second];

  for (size_t i = 0; i < class_order.size(); ++i) {
    if (quota[i] < 1)
      fail("make_run_splits: val_fraction " + fmt_shortest(val_fraction) +
           " leaves class '" + class_order[i] + "' without a validation sample");
  }

  for (size_t i = 0; i < class_order.size(); ++i) {
    auto ids = pool_by_class[class_order[i]];
    Rng rng(substream_seed(seed, "val-class:" + class_order[i]));
    rng.shuffle(ids);
    for (size_t j = 0; j < ids.size(); ++j) {
      if (j < size_t(quota[i])) split.val_ids.push_back(ids[j]);
      else split.train_ids.push_back(ids[j]);
    }
  }
  return split;
}

void write_foldplan_json(const fs::path& path, const FoldPlan& plan) {
  json j;
  j["k"] = plan.k;
  j["seed"] = plan.seed;
  j["folds"] = plan.folds;
  write_text_file(path, j.dump(2) + "\n");
}

FoldPlan read_foldplan_json(const fs::path& path) {
  json j = json::parse(read_text_file(path));
  FoldPlan plan;
  plan.k = j.at("k").get<int>();
  plan.seed = j.at("seed").get<uint64_t>();
  plan.folds = j.at("folds").get<std::vector<std::vector<std::string>>>();
  if (int(plan.folds.size()) != plan.k) fail("fold plan k does not match folds array");
  return plan;
}

void write_split_json(const fs::path& path, const SplitAssignment& split) {
  json j;
  j["test_fold"] = split.test_fold;
  j["val_fraction"] = split.val_fraction;
  j["train_ids"] = split.train_ids;
  j["val_ids"] = split.val_ids;
  j["test_ids"] = split.test_ids;
  write_text_file(path, j.dump(2) + "\n");
}

SplitAssignment read_split_json(const fs::path& path) {
  json j = json::parse(read_text_file(path));
  SplitAssignment s;
  s.test_fold = j.at("test_fold").get<int>();
  s.val_fraction = j.at("val_fraction").get<double>();
  s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  s.val_ids = j.at("val_ids").get<std::vector<std::string>>();
  s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  return s;
}

}  // namespace lymebench
