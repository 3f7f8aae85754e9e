#include <doctest.h>

#include <map>
#include <set>

#include "lymebench/folds.hpp"
#include "lymebench/image.hpp"
#include "lymebench/manifest.hpp"
#include "helpers.hpp"

using namespace lymebench;
using testutil::fresh_dir;

namespace {

// file-less manifest for fold arithmetic
Manifest synthetic_manifest(int n_pos, int n_neg) {
  Manifest m;
  for (int i = 0; i < n_pos; ++i)
    m.records.push_back({"em" + std::to_string(i), "", kPositiveClass, "synthetic",
                         uint64_t(i)});
  for (int i = 0; i < n_neg; ++i)
    m.records.push_back({"conf" + std::to_string(i), "", kNegativeClass, "synthetic",
                         uint64_t(100000 + i)});
  return m;
}

}  // namespace

TEST_CASE("ingest builds one record per decodable image with class counts") {
  const auto root = testutil::write_two_class_dataset("ingest_basic", 2, 3);
  const IngestResult result = ingest_directory(root);
  CHECK(result.manifest.size() == 5);
  CHECK(result.skipped_files == 0);
  auto counts = result.manifest.class_counts();
  CHECK(counts["EM"] == 2);
  CHECK(counts["Confuser"] == 3);
  for (const auto& rec : result.manifest.records) CHECK(rec.phash != 0);
}

TEST_CASE("ingest rejects a class directory with zero images") {
  const auto root = fresh_dir("ingest_empty_class");
  save_png(root / "EM" / "a.png", testutil::noise_image(16, 16, 1));
  fs::create_directories(root / "Confuser");
  CHECK_THROWS_WITH_AS(ingest_directory(root),
                       doctest::Contains("class has zero images"), Error);
}

TEST_CASE("ingest skips undecodable files with a warning count") {
  const auto root = testutil::write_two_class_dataset("ingest_skip", 2, 3);
  write_text_file(root / "EM" / "notes.txt", "not an image\n");
  const IngestResult result = ingest_directory(root);
  CHECK(result.manifest.size() == 5);
  CHECK(result.skipped_files == 1);
}

TEST_CASE("ingest fails on a missing root") {
  CHECK_THROWS_AS(ingest_directory("test_tmp/definitely_absent_root"), Error);
}

TEST_CASE("dedup collapses byte-identical files and keeps unrelated photos") {
  const auto root = fresh_dir("dedup_basic");
  const Image a = testutil::gradient_image(32, 32);
  save_png(root / "EM" / "a.png", a);
  save_png(root / "EM" / "a_copy.png", a);
  save_png(root / "EM" / "b.png", testutil::noise_image(32, 32, 5));
  save_png(root / "Confuser" / "c.png", testutil::noise_image(32, 32, 9));
  const Manifest m = ingest_directory(root).manifest;
  const Manifest d = dedup(m, 0);
  CHECK(m.size() == 4);
  CHECK(d.size() == 3);  // the byte-identical copy goes away
  CHECK(d.records[0].id == "EM/a.png");  // earliest record wins
}

TEST_CASE("a half-downscaled copy hashes identically and dedups at threshold 0") {
  const Image big = testutil::gradient_image(64, 64);
  const Image half = resize_bilinear(big, 32, 32);
  CHECK(hamming64(dhash64(big), dhash64(half)) == 0);

  const auto root = fresh_dir("dedup_scale");
  save_png(root / "EM" / "big.png", big);
  save_png(root / "EM" / "half.png", half);
  save_png(root / "Confuser" / "other.png", testutil::noise_image(32, 32, 77));
  const Manifest d = dedup(ingest_directory(root).manifest, 0);
  CHECK(d.size() == 2);
}

TEST_CASE("dedup is idempotent and empty manifests pass through") {
  Manifest empty;
  CHECK(dedup(empty, 0).size() == 0);
  const auto root = testutil::write_two_class_dataset("dedup_idem", 3, 3);
  const Manifest m = dedup(ingest_directory(root).manifest, 2);
  const Manifest again = dedup(m, 2);
  CHECK(again.size() == m.size());
  for (size_t i = 0; i < m.records.size(); ++i) CHECK(again.records[i].id == m.records[i].id);
}

TEST_CASE("manifest csv round-trips including hex phash") {
  const auto root = testutil::write_two_class_dataset("manifest_csv", 2, 2);
  const Manifest m = ingest_directory(root).manifest;
  const auto dir = fresh_dir("manifest_csv_out");
  write_manifest_csv(dir / "manifest.csv", m);
  const Manifest back = read_manifest_csv(dir / "manifest.csv");
  REQUIRE(back.size() == m.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(back.records[i].id == m.records[i].id);
    CHECK(back.records[i].phash == m.records[i].phash);
    CHECK(back.records[i].label == m.records[i].label);
  }
  const auto lines = read_lines(dir / "manifest.csv");
  CHECK(lines[0] == "id,path,label,source,phash");
  CHECK(lines[1].substr(lines[1].size() - 16).find_first_not_of("0123456789abcdef") ==
        std::string::npos);
}

TEST_CASE("stratified k-fold reproduces the benchmark's per-fold class counts") {
  const Manifest m = synthetic_manifest(866, 806);
  const FoldPlan plan = stratified_kfold(m, 5, 42);
  std::multiset<int> em_counts, conf_counts;
  for (int f = 0; f < 5; ++f) {
    int em = 0, conf = 0;
    for (const auto& id : plan.folds[size_t(f)])
      (m.by_id(id).label == kPositiveClass ? em : conf)++;
    em_counts.insert(em);
    conf_counts.insert(conf);
  }
  CHECK(em_counts == std::multiset<int>{173, 173, 173, 173, 174});
  CHECK(conf_counts == std::multiset<int>{161, 161, 161, 161, 162});
}

TEST_CASE("exactly divisible classes land one per fold") {
  const Manifest m = synthetic_manifest(5, 5);
  const FoldPlan plan = stratified_kfold(m, 5, 1);
  for (int f = 0; f < 5; ++f) {
    int em = 0, conf = 0;
    for (const auto& id : plan.folds[size_t(f)])
      (m.by_id(id).label == kPositiveClass ? em : conf)++;
    CHECK(em == 1);
    CHECK(conf == 1);
  }
}

TEST_CASE("a class smaller than k is rejected") {
  const Manifest m = synthetic_manifest(5, 3);
  CHECK_THROWS_WITH_AS(stratified_kfold(m, 5, 1), doctest::Contains("fewer than k"), Error);
}

TEST_CASE("fold plans partition the manifest and stay within +/-1 per class") {
  for (uint64_t seed : {1ULL, 7ULL, 99ULL}) {
    const Manifest m = synthetic_manifest(37, 23);
    const FoldPlan plan = stratified_kfold(m, 4, seed);
    std::set<std::string> seen;
    for (const auto& fold : plan.folds)
      for (const auto& id : fold) CHECK(seen.insert(id).second);  // disjoint
    CHECK(seen.size() == m.size());                               // covering
    for (const auto& cls : {kPositiveClass, kNegativeClass}) {
      int lo = 1 << 30, hi = 0;
      for (int f = 0; f < plan.k; ++f) {
        int n = 0;
        for (const auto& id : plan.folds[size_t(f)])
          if (m.by_id(id).label == cls) ++n;
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("identical inputs and seed reproduce byte-identical serialized plans") {
  const Manifest m = synthetic_manifest(31, 29);
  const auto dir = fresh_dir("fold_determinism");
  write_foldplan_json(dir / "a.json", stratified_kfold(m, 5, 1234));
  write_foldplan_json(dir / "b.json", stratified_kfold(m, 5, 1234));
  CHECK(read_text_file(dir / "a.json") == read_text_file(dir / "b.json"));
  write_foldplan_json(dir / "c.json", stratified_kfold(m, 5, 1235));
  CHECK(read_text_file(dir / "a.json") != read_text_file(dir / "c.json"));
}

TEST_CASE("run splits honor the documented arithmetic on the 1672-record plan") {
  const Manifest m = synthetic_manifest(866, 806);
  const FoldPlan plan = stratified_kfold(m, 5, 3);
  for (int f = 0; f < 5; ++f) {
    const SplitAssignment s = make_run_splits(plan, m, f, 0.10, 3);
    const size_t test_n = plan.folds[size_t(f)].size();
    const size_t pool = 1672 - test_n;
    CHECK(s.test_ids.size() == test_n);
    CHECK(s.val_ids.size() == size_t(std::llround(0.10 * double(pool))));
    CHECK(s.train_ids.size() == pool - s.val_ids.size());
    // stratified within +/-1 per class
    for (const auto& cls : {kPositiveClass, kNegativeClass}) {
      size_t pool_c = 0, val_c = 0;
      for (const auto& id : s.train_ids)
        if (m.by_id(id).label == cls) ++pool_c;
      for (const auto& id : s.val_ids)
        if (m.by_id(id).label == cls) {
          ++pool_c;
          ++val_c;
        }
      CHECK(std::abs(double(val_c) - 0.10 * double(pool_c)) <= 1.0);
    }
  }
}

TEST_CASE("test folds rotate over every record exactly once") {
  const Manifest m = synthetic_manifest(26, 24);
  const FoldPlan plan = stratified_kfold(m, 5, 8);
  std::map<std::string, int> seen;
  for (int f = 0; f < 5; ++f) {
    const SplitAssignment s = make_run_splits(plan, m, f, 0.10, 8);
    for (const auto& id : s.test_ids) ++seen[id];
    std::set<std::string> all(s.train_ids.begin(), s.train_ids.end());
    CHECK(all.size() == s.train_ids.size());
    for (const auto& id : s.val_ids) CHECK(all.insert(id).second);
    for (const auto& id : s.test_ids) CHECK(all.insert(id).second);
    CHECK(all.size() == m.size());
  }
  CHECK(seen.size() == m.size());
  for (const auto& [id, n] : seen) CHECK(n == 1);
}

TEST_CASE("degenerate validation fractions are rejected") {
  const Manifest m = synthetic_manifest(30, 30);
  const FoldPlan plan = stratified_kfold(m, 5, 2);
  CHECK_THROWS_WITH_AS(make_run_splits(plan, m, 0, 0.001, 2),
                       doctest::Contains("without a validation sample"), Error);
  CHECK_THROWS_AS(make_run_splits(plan, m, 5, 0.1, 2), Error);
  CHECK_THROWS_AS(make_run_splits(plan, m, 0, 0.0, 2), Error);
  CHECK_THROWS_AS(make_run_splits(plan, m, 0, 1.0, 2), Error);
}
