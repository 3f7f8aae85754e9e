#include "lymebench/runstore.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lymebench/report.hpp"
#include "lymebench/stats.hpp"

namespace lymebench::store {

using nlohmann::json;
using transfer::Strategy;
using transfer::TrainedModel;

StrategySpec parse_strategy_spec(const std::string& text) {
  StrategySpec spec;
  const auto colon = text.find(':');
  const std::string name = trim(text.substr(0, colon));
  spec.strategy = transfer::strategy_from_name(name);
  if (colon == std::string::npos) {
    if (transfer::strategy_needs_unfreeze_depth(spec.strategy))
      fail("strategy " + name + " needs ':U=<depth>' or ':grid=<d>;<d>;...'");
    return spec;
  }
  const std::string arg = trim(text.substr(colon + 1));
  if (arg.starts_with("U=")) {
    spec.unfreeze_depth = std::stoi(arg.substr(2));
  } else if (arg.starts_with("grid=")) {
    for (const auto& tok : split(arg.substr(5), ';'))
      if (!trim(tok).empty()) spec.depth_grid.push_back(std::stoi(trim(tok)));
    if (spec.depth_grid.empty()) fail("empty unfreeze-depth grid in: " + text);
  } else {
    fail("bad strategy argument (want U=<n> or grid=<n>;...): " + text);
  }
  return spec;
}

std::string strategy_spec_string(const StrategySpec& spec) {
  std::string s = transfer::strategy_name(spec.strategy);
  if (spec.unfreeze_depth > 0) s += ":U=" + std::to_string(spec.unfreeze_depth);
  if (!spec.depth_grid.empty()) {
    s += ":grid=";
    for (size_t i = 0; i < spec.depth_grid.size(); ++i) {
      if (i) s += ";";
      s += std::to_string(spec.depth_grid[i]);
    }
  }
  return s;
}

void RunConfig::validate() const {
  if (schema_version != 1) fail("unsupported runconfig schema_version");
  if (dataset_root.empty() && manifest_path.empty())
    fail("runconfig needs dataset_root or manifest");
  if (backbones.empty()) fail("runconfig lists no backbones");
  if (strategies.empty()) fail("runconfig lists no strategies");
  const auto& reg = backbones::Registry::instance();
  for (const auto& b : backbones)
    if (!reg.has(b)) fail("unknown backbone '" + b + "'; valid names: " + reg.names_joined());
  for (const auto& s : strategies) {
    if (transfer::strategy_needs_unfreeze_depth(s.strategy) && s.unfreeze_depth < 0 &&
        s.depth_grid.empty())
      fail(std::string("strategy ") + transfer::strategy_name(s.strategy) +
           " needs a fixed U or a grid");
    if (transfer::strategy_uses_intermediate(s.strategy) && intermediate_root.empty())
      fail(std::string("strategy ") + transfer::strategy_name(s.strategy) +
           " needs intermediate_root");
  }
  if (k < 2) fail("k must be >= 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction must be in (0,1)");
  hp.validate();
}

RunConfig parse_runconfig_text(const std::string& text) {
  RunConfig cfg;
  cfg.raw_text = text;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      fail("runconfig line " + std::to_string(lineno) + " is not 'key = value': " + stripped);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "schema_version") cfg.schema_version = std::stoi(value);
    else if (key == "dataset_root") cfg.dataset_root = value;
    else if (key == "manifest") cfg.manifest_path = value;
    else if (key == "intermediate_root") cfg.intermediate_root = value;
    else if (key == "backbones") {
      for (const auto& tok : split(value, ','))
        if (!trim(tok).empty()) cfg.backbones.push_back(trim(tok));
    } else if (key == "strategies") {
      for (const auto& tok : split(value, ','))
        if (!trim(tok).empty()) cfg.strategies.push_back(parse_strategy_spec(trim(tok)));
    } else if (key == "k") cfg.k = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "val_fraction") cfg.val_fraction = std::stod(value);
    else if (key == "dedup_threshold") cfg.dedup_threshold = std::stoi(value);
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "weight_store") cfg.weight_store = value;
    else if (key == "expansion_factor") cfg.expansion_factor = std::stoi(value);
    else if (key == "batch_size") cfg.hp.batch_size = std::stoi(value);
    else if (key == "lr_head") cfg.hp.lr_head = std::stod(value);
    else if (key == "lr_finetune") cfg.hp.lr_finetune = std::stod(value);
    else if (key == "patience") cfg.hp.early_stop_patience = std::stoi(value);
    else if (key == "max_epochs") cfg.hp.max_epochs = std::stoi(value);
    else if (key == "head_epochs_cap") cfg.hp.head_epochs_cap = std::stoi(value);
    else fail("unknown runconfig key on line " + std::to_string(lineno) + ": " + key);
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_runconfig(const fs::path& path) {
  return parse_runconfig_text(read_text_file(path));
}

std::string run_id(const RunConfig& cfg) {
  return sha256_hex(cfg.raw_text + "\nseed=" + std::to_string(cfg.seed)).substr(0, 12);
}

// ---------------------------------------------------------------------------
// per-run artifacts
// ---------------------------------------------------------------------------
void write_history_csv(const fs::path& path, const std::vector<nn::EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& rec : history)
    out << rec.epoch << ',' << fmt_double(rec.train_loss, 6) << ','
        << fmt_double(rec.train_acc, 6) << ',' << fmt_double(rec.val_loss, 6) << ','
        << fmt_double(rec.val_acc, 6) << '\n';
  write_text_file(path, out.str());
}

std::vector<nn::EpochRecord> read_history_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "epoch,train_loss,train_acc,val_loss,val_acc")
    fail("unexpected history header in " + path.string());
  std::vector<nn::EpochRecord> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = csv_parse_line(lines[i]);
    if (f.size() != 5) fail("bad history row in " + path.string());
    out.push_back({std::stoi(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]),
                   std::stod(f[4])});
  }
  return out;
}

void write_phases_json(const fs::path& path, const TrainedModel& tm) {
  json j;
  j["best_epoch"] = tm.best_epoch;
  j["stopped_epoch"] = tm.stopped_epoch;
  json phases = json::array();
  for (const auto& p : tm.phases) {
    phases.push_back({{"name", p.name},
                      {"lr", p.lr},
                      {"start_epoch", p.start_epoch},
                      {"epochs", p.epochs},
                      {"best_epoch", p.best_epoch},
                      {"stopped_early", p.stopped_early}});
  }
  j["phases"] = phases;
  write_text_file(path, j.dump(2) + "\n");
}

void write_run_artifacts(const fs::path& run_dir, const TrainedModel& tm,
                         const PredictionSet& test_predictions) {
  fs::create_directories(run_dir);
  const_cast<nn::Model&>(tm.model).save_weights(run_dir / "weights.lbw");
  write_history_csv(run_dir / "history.csv", tm.history);
  write_phases_json(run_dir / "phases.json", tm);
  write_predictions_csv(run_dir / "predictions.csv", test_predictions);

  const MetricReport report = evaluate_predictions(test_predictions);
  write_metrics_json(run_dir / "metrics.json", report);
  write_roc_csv(run_dir / "roc.csv", report.roc);

  json meta;
  meta["backbone"] = tm.config.backbone;
  meta["strategy"] = transfer::strategy_name(tm.config.strategy);
  meta["unfreeze_depth"] = tm.config.unfreeze_depth;
  meta["fold"] = tm.fold;
  meta["config_name"] = tm.config.display_name();
  write_text_file(run_dir / "run_meta.json", meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// execute_run
// ---------------------------------------------------------------------------
TrainSummary execute_run(const RunConfig& cfg) {
  cfg.validate();
  TrainSummary summary;
  const fs::path root = cfg.output_dir / run_id(cfg);
  summary.run_root = root;
  fs::create_directories(root);
  write_text_file(root / "runconfig.txt", cfg.raw_text);

  // 1. manifest
  Manifest manifest;
  if (!cfg.manifest_path.empty()) {
    manifest = read_manifest_csv(cfg.manifest_path);
  } else {
    IngestResult ingest = ingest_directory(cfg.dataset_root);
    if (ingest.skipped_files > 0)
      std::cerr << "warning: skipped " << ingest.skipped_files
                << " non-image files during ingest\n";
    manifest = dedup(ingest.manifest, cfg.dedup_threshold);
  }
  write_manifest_csv(root / "manifest.csv", manifest);

  // 2. folds
  const FoldPlan plan = stratified_kfold(manifest, cfg.k, cfg.seed);
  write_foldplan_json(root / "foldplan.json", plan);

  // 3. per-fold splits + augmentation (shared by every config)
  AugmentationSpec aug_spec = standard_augmentation_spec();
  if (cfg.expansion_factor > 0) aug_spec.expansion_factor = cfg.expansion_factor;
  std::vector<SplitAssignment> splits;
  std::vector<AugmentedSet> augmented;
  for (int f = 0; f < cfg.k; ++f) {
    SplitAssignment s = make_run_splits(plan, manifest, f, cfg.val_fraction, cfg.seed);
    write_split_json(root / "splits" / ("fold" + std::to_string(f) + ".json"), s);
    const fs::path aug_dir = root / "augmented" / ("fold" + std::to_string(f));
    AugmentedSet a = expand(s.train_ids, manifest, aug_spec, cfg.seed, aug_dir);
    write_lineage_csv(aug_dir / "lineage.csv", a);
    splits.push_back(std::move(s));
    augmented.push_back(std::move(a));
  }

  // 4. intermediate dataset
  transfer::IntermediateDataset intermediate;
  bool have_intermediate = false;
  if (!cfg.intermediate_root.empty()) {
    intermediate = transfer::load_intermediate_dataset(cfg.intermediate_root);
    have_intermediate = true;
  }

  transfer::RunEnv env;
  env.manifest = &manifest;
  env.intermediate = have_intermediate ? &intermediate : nullptr;
  env.weight_store = cfg.weight_store;

  // 5. fan-out
  for (const auto& backbone : cfg.backbones) {
    for (const auto& spec : cfg.strategies) {
      transfer::TransferConfig tc;
      tc.strategy = spec.strategy;
      tc.backbone = backbone;
      tc.unfreeze_depth = spec.unfreeze_depth;
      if (spec.needs_search()) {
        const auto search = transfer::search_unfreeze_depth(
            spec.strategy, backbone, spec.depth_grid, splits[0], augmented[0], cfg.hp,
            cfg.seed, env);
        tc.unfreeze_depth = search.best_depth;
        json j;
        j["backbone"] = backbone;
        j["strategy"] = transfer::strategy_name(spec.strategy);
        j["best_depth"] = search.best_depth;
        json cand = json::array();
        for (const auto& [u, acc] : search.candidate_val_acc)
          cand.push_back({{"depth", u}, {"val_accuracy", acc}});
        j["candidates"] = cand;
        write_text_file(root / ("unfreeze_search_" + backbone + ".json"), j.dump(2) + "\n");
      }
      for (int f = 0; f < cfg.k; ++f) {
        RunOutcome outcome;
        outcome.fold = f;
        try {
          TrainedModel tm = transfer::run_configuration(
              tc, splits[size_t(f)], augmented[size_t(f)], cfg.hp,
              substream_seed(cfg.seed, "fold:" + std::to_string(f)), env);
          outcome.config_name = tm.config.display_name();
          const fs::path run_dir = root / "runs" / outcome.config_name / std::to_string(f);
          PredictionSet preds =
              transfer::predict_set(tm.model, splits[size_t(f)].test_ids, manifest,
                                    cfg.hp.batch_size);
          write_run_artifacts(run_dir, tm, preds);
          outcome.ok = true;
        } catch (const std::exception& e) {
          outcome.config_name = tc.display_name();
          outcome.ok = false;
          outcome.error = e.what();
          summary.all_ok = false;
          const fs::path run_dir = root / "runs" / outcome.config_name / std::to_string(f);
          fs::create_directories(run_dir);
          json err;
          err["config"] = outcome.config_name;
          err["fold"] = f;
          err["error"] = outcome.error;
          write_text_file(run_dir / "error.json", err.dump(2) + "\n");
        }
        summary.outcomes.push_back(outcome);
      }
    }
  }

  // 6. summaries
  regenerate_summaries(root);
  return summary;
}

// ---------------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------------
void regenerate_summaries(const fs::path& run_root) {
  const fs::path runs = run_root / "runs";
  if (!fs::exists(runs)) fail("no runs directory under " + run_root.string());

  std::vector<std::string> config_names;
  for (const auto& entry : fs::directory_iterator(runs))
    if (entry.is_directory()) config_names.push_back(entry.path().filename().string());
  std::sort(config_names.begin(), config_names.end());

  std::vector<report::ConfigAggregate> aggregates;
  std::vector<std::pair<std::string, double>> accuracy_means;
  std::ostringstream accuracy_csv;
  accuracy_csv << "model,fold,accuracy\n";
  std::map<std::string, std::string> config_backbone;

  for (const auto& name : config_names) {
    std::vector<int> folds;
    for (const auto& fold_dir : fs::directory_iterator(runs / name))
      if (fold_dir.is_directory()) folds.push_back(std::stoi(fold_dir.path().filename()));
    std::sort(folds.begin(), folds.end());

    std::vector<MetricReport> reports;
    bool complete = true;
    for (int f : folds) {
      const fs::path metrics = runs / name / std::to_string(f) / "metrics.json";
      if (!fs::exists(metrics)) {
        complete = false;
        continue;
      }
      MetricReport r = read_metrics_json(metrics);
      accuracy_csv << csv_escape(name) << ',' << f << ',' << fmt_shortest(r.accuracy) << '\n';
      reports.push_back(std::move(r));
      const fs::path meta = runs / name / std::to_string(f) / "run_meta.json";
      if (fs::exists(meta) && !config_backbone.count(name))
        config_backbone[name] =
            json::parse(read_text_file(meta)).at("backbone").get<std::string>();
    }
    report::ConfigAggregate agg;
    agg.name = name;
    agg.folds_found = int(reports.size());
    agg.complete = complete && reports.size() >= 2;
    if (reports.size() >= 2) agg.aggregate = aggregate_folds(reports);
    aggregates.push_back(std::move(agg));
  }

  // summary.json: {config: {metric: {mean, std}}}
  json summary = json::object();
  for (const auto& agg : aggregates) {
    if (agg.folds_found < 2) continue;
    json metrics = json::object();
    for (const auto& [metric, ms] : agg.aggregate.metrics) {
      if (ms.n == 0) metrics[metric] = {{"mean", nullptr}, {"std", nullptr}, {"folds", 0}};
      else metrics[metric] = {{"mean", ms.mean}, {"std", ms.stdev}, {"folds", ms.n}};
    }
    summary[agg.name] = metrics;
    const auto* acc = agg.aggregate.find("accuracy");
    if (acc && acc->n > 0) accuracy_means.push_back({agg.name, acc->mean});
  }
  write_text_file(run_root / "summary.json", summary.dump(2) + "\n");
  write_text_file(run_root / "summary_accuracy.csv", accuracy_csv.str());

  // metric tables
  write_text_file(run_root / "metrics_table.csv", report::render_metric_table_csv(aggregates));
  write_text_file(run_root / "metrics_table.txt", report::render_metric_table_text(aggregates));

  // significance comparison when at least two complete configs share folds
  {
    std::vector<report::ConfigAggregate> complete;
    for (const auto& a : aggregates)
      if (a.complete && a.folds_found >= 2) complete.push_back(a);
    if (complete.size() >= 2) {
      const AccuracyMatrix acc = read_accuracy_csv(run_root / "summary_accuracy.csv");
      bool rectangular = true;
      for (const auto& row : acc.values)
        if (int(row.size()) != acc.folds) rectangular = false;
      if (rectangular && acc.models.size() >= 2 && acc.folds >= 2) {
        const RankMatrix ranks = rank_models(acc);
        const CDResult cd = nemenyi_cd(ranks, 0.1);
        write_text_file(run_root / "cd_diagram.svg", render_cd_diagram(ranks, cd));
        write_cd_result_json(run_root / "cd_result.json", ranks, cd);
      }
    }
  }

  // complexity table + bubble chart over the backbones actually used
  {
    std::vector<std::string> backbones_used;
    for (const auto& [config, backbone] : config_backbone)
      if (std::find(backbones_used.begin(), backbones_used.end(), backbone) ==
          backbones_used.end())
        backbones_used.push_back(backbone);
    std::sort(backbones_used.begin(), backbones_used.end());
    std::vector<profile::ComplexityReport> complexity;
    const auto& reg = backbones::Registry::instance();
    for (const auto& b : backbones_used) {
      nn::Model m = transfer::attach_head(reg.build(b), transfer::HeadSpec{}, 0);
      profile::ComplexityReport r = profile::structural_report(m);
      r.model_name = b;
      complexity.push_back(std::move(r));
    }
    if (!complexity.empty())
      profile::write_complexity_csv(run_root / "complexity.csv", complexity);

    std::vector<std::pair<std::string, double>> acc_by_backbone;
    for (const auto& [config, mean_acc] : accuracy_means) {
      auto it = config_backbone.find(config);
      if (it != config_backbone.end()) acc_by_backbone.push_back({it->second, mean_acc});
    }
    if (!acc_by_backbone.empty() && !complexity.empty()) {
      std::vector<std::string> warnings;
      const auto entries = report::join_bubble_entries(acc_by_backbone, complexity, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      if (!entries.empty())
        write_text_file(run_root / "bubble_chart.svg", report::render_bubble_chart_svg(entries));
    }
  }
}

}  // namespace lymebench::store
