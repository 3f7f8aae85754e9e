#include <doctest.h>

#include "lymebench/report.hpp"
#include "lymebench/runstore.hpp"
#include "helpers.hpp"

using namespace lymebench;
using testutil::fresh_dir;

namespace {

const char* kMinimalConfig =
    "schema_version = 1\n"
    "dataset_root = data\n"
    "backbones = MicroCNN32\n"
    "strategies = IMG_WFT, IMG_FTU:U=3, IMG_HAMPP_FTU:grid=2;4\n"
    "intermediate_root = ham\n"
    "k = 4\n"
    "seed = 11\n";

MetricReport fake_report(double accuracy, uint64_t seed) {
  Rng rng(seed);
  PredictionSet p;
  const int n = 40;
  const int correct = int(std::lround(accuracy * n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const bool right = i < correct;
    const double noise = rng.next_double() * 0.2;
    const double score = right ? (label ? 0.8 + noise * 0.5 : 0.2 - noise * 0.5)
                               : (label ? 0.2 - noise * 0.5 : 0.8 + noise * 0.5);
    p.entries.push_back({"id" + std::to_string(i), label, std::clamp(score, 0.0, 1.0)});
  }
  return evaluate_predictions(p);
}

}  // namespace

TEST_CASE("runconfig parsing fills defaults and validates strategy specs") {
  const store::RunConfig cfg = store::parse_runconfig_text(kMinimalConfig);
  CHECK(cfg.backbones == std::vector<std::string>{"MicroCNN32"});
  REQUIRE(cfg.strategies.size() == 3);
  CHECK(cfg.strategies[0].strategy == transfer::Strategy::IMG_WFT);
  CHECK(cfg.strategies[1].unfreeze_depth == 3);
  CHECK(cfg.strategies[2].depth_grid == std::vector<int>{2, 4});
  CHECK(cfg.k == 4);
  CHECK(cfg.seed == 11);
  CHECK(cfg.hp.batch_size == 32);  // spec default

  CHECK_THROWS_WITH_AS(store::parse_runconfig_text("schema_version = 1\n"),
                       doctest::Contains("dataset_root"), Error);
  CHECK_THROWS_WITH_AS(store::parse_runconfig_text(
                           "dataset_root = x\nbackbones = NotANet\nstrategies = IMG_WFT\n"),
                       doctest::Contains("valid names"), Error);
  CHECK_THROWS_WITH_AS(store::parse_runconfig_text(
                           "dataset_root = x\nbackbones = MicroCNN32\nstrategies = IMG_FTU\n"),
                       doctest::Contains("needs"), Error);
  CHECK_THROWS_AS(store::parse_runconfig_text("unknown_key = 1\n"), Error);
}

TEST_CASE("run ids hash the config bytes and the seed") {
  store::RunConfig a = store::parse_runconfig_text(kMinimalConfig);
  store::RunConfig b = store::parse_runconfig_text(kMinimalConfig);
  CHECK(store::run_id(a) == store::run_id(b));
  CHECK(store::run_id(a).size() == 12);
  b.seed = 12;
  CHECK(store::run_id(a) != store::run_id(b));
  store::RunConfig c = store::parse_runconfig_text(std::string(kMinimalConfig) + "# note\n");
  CHECK(store::run_id(a) != store::run_id(c));
}

TEST_CASE("metric tables flag best columns and incomplete rows") {
  std::vector<report::ConfigAggregate> rows;
  {
    report::ConfigAggregate good;
    good.name = "ModelA";
    good.folds_found = 3;
    good.aggregate = aggregate_folds(
        {fake_report(0.9, 1), fake_report(0.88, 2), fake_report(0.92, 3)});
    rows.push_back(good);
  }
  {
    report::ConfigAggregate worse;
    worse.name = "ModelB";
    worse.folds_found = 3;
    worse.aggregate = aggregate_folds(
        {fake_report(0.7, 4), fake_report(0.72, 5), fake_report(0.68, 6)});
    rows.push_back(worse);
  }
  {
    report::ConfigAggregate incomplete;
    incomplete.name = "ModelC";
    incomplete.folds_found = 1;
    incomplete.complete = false;
    rows.push_back(incomplete);
  }

  const std::string text = report::render_metric_table_text(rows);
  CHECK(text.find("ModelA") != std::string::npos);
  CHECK(text.find("(incomplete)") != std::string::npos);
  // the better model owns the accuracy column's best marker
  const size_t line_a = text.find("ModelA");
  const size_t line_b = text.find("ModelB");
  const std::string row_a = text.substr(line_a, text.find('\n', line_a) - line_a);
  CHECK(row_a.find('*') != std::string::npos);
  const std::string row_b = text.substr(line_b, text.find('\n', line_b) - line_b);

  const std::string csv = report::render_metric_table_csv(rows);
  const auto lines = split(csv, '\n');
  CHECK(lines[0].find("model,accuracy,best") == 0);
  CHECK(lines[1].find("ModelA") == 0);
  CHECK(lines[3].find("incomplete") != std::string::npos);

  // parse(emit(x)) reproduces the grid
  const auto parsed = report::parse_metric_table_csv(csv);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0].name == "ModelA");
  CHECK(parsed[0].status == "complete");
  CHECK(parsed[2].status == "incomplete");
  const auto* acc = rows[0].aggregate.find("accuracy");
  const std::string expect_cell =
      fmt_double(acc->mean, 4) + " ± " + fmt_double(acc->stdev, 4);
  bool saw = false;
  for (const auto& [metric, cell] : parsed[0].cells)
    if (metric == "accuracy") {
      CHECK(cell == expect_cell);
      saw = true;
    }
  CHECK(saw);
  CHECK(std::find(parsed[0].best.begin(), parsed[0].best.end(), "accuracy") !=
        parsed[0].best.end());
  CHECK(report::render_metric_table_csv(rows) == csv);  // deterministic emit
}

TEST_CASE("bubble chart: equal parameters draw equal areas; missing complexity omits") {
  std::vector<report::BubbleEntry> entries = {
      {"A", 0.84, 7.75, 23.59},
      {"B", 0.83, 0.79, 23.59},  // same params as A
      {"C", 0.81, 0.17, 1.53},
  };
  const std::string svg = report::render_bubble_chart_svg(entries);
  // equal params -> identical radius attribute values
  std::vector<std::string> radii;
  size_t pos = 0;
  while ((pos = svg.find(" r=\"", pos)) != std::string::npos) {
    const size_t end = svg.find('"', pos + 4);
    radii.push_back(svg.substr(pos + 4, end - pos - 4));
    pos = end;
  }
  REQUIRE(radii.size() == 3);
  CHECK(radii[0] == radii[1]);
  CHECK(radii[2] != radii[0]);
  CHECK(svg.find("<metadata") != std::string::npos);
  CHECK(svg.find("23.59") != std::string::npos);
  CHECK(report::render_bubble_chart_svg(entries) == svg);  // deterministic

  std::vector<profile::ComplexityReport> complexity(1);
  complexity[0].model_name = "A";
  complexity[0].flops_giga = 7.75;
  complexity[0].params_millions = 23.59;
  std::vector<std::string> warnings;
  const auto joined = report::join_bubble_entries({{"A", 0.84}, {"Ghost", 0.9}}, complexity,
                                                  &warnings);
  CHECK(joined.size() == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("Ghost") != std::string::npos);
}

TEST_CASE("external predictions matching the labels score accuracy 1") {
  const auto root = testutil::write_two_class_dataset("report_external", 3, 3);
  const Manifest m = ingest_directory(root).manifest;
  const auto dir = fresh_dir("report_external_out");
  PredictionSet p;
  for (const auto& rec : m.records)
    p.entries.push_back({rec.id, transfer::binary_label(m, rec.label),
                         rec.label == kPositiveClass ? 0.9 : 0.1});
  write_predictions_csv(dir / "preds.csv", p);
  const MetricReport r = report::evaluate_external_predictions(dir / "preds.csv", m);
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.auc == doctest::Approx(1.0));
}

TEST_CASE("a prediction file with a coverage gap names the missing id") {
  const auto root = testutil::write_two_class_dataset("report_gap", 2, 2);
  const Manifest m = ingest_directory(root).manifest;
  const auto dir = fresh_dir("report_gap_out");
  PredictionSet p;
  for (size_t i = 0; i + 1 < m.records.size(); ++i)
    p.entries.push_back({m.records[i].id, 1, 0.5});
  write_predictions_csv(dir / "preds.csv", p);
  const std::string missing_id = m.records.back().id;
  CHECK_THROWS_WITH_AS(report::evaluate_external_predictions(dir / "preds.csv", m),
                       doctest::Contains(missing_id.c_str()), Error);
}

TEST_CASE("an ensemble of five prediction files aggregates as mean ± std") {
  const auto root = testutil::write_two_class_dataset("report_ensemble", 4, 4);
  const Manifest m = ingest_directory(root).manifest;
  const auto dir = fresh_dir("report_ensemble_out");
  std::vector<fs::path> files;
  Rng rng(12);
  for (int sub = 0; sub < 5; ++sub) {
    PredictionSet p;
    for (const auto& rec : m.records) {
      const int label = transfer::binary_label(m, rec.label);
      // imperfect, varying sub-models
      const bool correct = rng.next_double() > 0.2;
      const double score = (correct == (label == 1)) ? 0.75 + 0.2 * rng.next_double()
                                                     : 0.25 - 0.2 * rng.next_double();
      p.entries.push_back({rec.id, label, std::clamp(score, 0.0, 1.0)});
    }
    const fs::path f = dir / ("sub" + std::to_string(sub) + ".csv");
    write_predictions_csv(f, p);
    files.push_back(f);
  }
  const auto [reports, agg] = report::evaluate_external_ensemble(files, m);
  CHECK(reports.size() == 5);
  CHECK(agg.k == 5);
  const MeanStd* acc = agg.find("accuracy");
  REQUIRE(acc);
  CHECK(acc->n == 5);
  CHECK(acc->mean > 0.0);
  CHECK(acc->stdev >= 0.0);
}

TEST_CASE("history csv round-trips") {
  std::vector<nn::EpochRecord> history = {{0, 0.5, 0.7, 0.6, 0.65}, {1, 0.4, 0.8, 0.5, 0.75}};
  const auto dir = fresh_dir("report_history");
  store::write_history_csv(dir / "history.csv", history);
  const auto lines = read_lines(dir / "history.csv");
  CHECK(lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc");
  const auto back = store::read_history_csv(dir / "history.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].epoch == 1);
  CHECK(back[1].val_acc == doctest::Approx(0.75));
}
