// lymebench: transfer-learning benchmark harness for two-class skin-lesion
// image classification. See README.md for the pipeline walkthrough.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cstdlib>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lymebench/augment.hpp"
#include "lymebench/backbones.hpp"
#include "lymebench/complexity.hpp"
#include "lymebench/explain.hpp"
#include "lymebench/folds.hpp"
#include "lymebench/image.hpp"
#include "lymebench/manifest.hpp"
#include "lymebench/report.hpp"
#include "lymebench/runstore.hpp"
#include "lymebench/stats.hpp"
#include "lymebench/transfer.hpp"

using namespace lymebench;
using nlohmann::json;

namespace {

int cmd_ingest(const std::string& root, const std::string& out, int threshold, bool no_dedup) {
  IngestResult result = ingest_directory(root);
  if (result.skipped_files > 0)
    std::cerr << "warning: skipped " << result.skipped_files << " non-image files\n";
  Manifest m = no_dedup ? result.manifest : dedup(result.manifest, threshold);
  write_manifest_csv(out, m);
  const auto counts = m.class_counts();
  std::cout << "manifest: " << m.size() << " records";
  for (const auto& [cls, n] : counts) std::cout << "  " << cls << "=" << n;
  if (!no_dedup)
    std::cout << "  (dropped " << result.manifest.size() - m.size() << " near-duplicates)";
  std::cout << "\n";
  return 0;
}

int cmd_split(const std::string& manifest_path, int k, uint64_t seed, const std::string& out) {
  const Manifest m = read_manifest_csv(manifest_path);
  const FoldPlan plan = stratified_kfold(m, k, seed);
  write_foldplan_json(out, plan);
  std::cout << "fold plan: k=" << k << " seed=" << seed << " -> " << out << "\n";
  return 0;
}

int cmd_augment(const std::string& manifest_path, const std::string& foldplan_path,
                int test_fold, double val_fraction, uint64_t seed, const std::string& out_dir,
                int expansion) {
  const Manifest m = read_manifest_csv(manifest_path);
  const FoldPlan plan = read_foldplan_json(foldplan_path);
  const SplitAssignment split = make_run_splits(plan, m, test_fold, val_fraction, seed);
  AugmentationSpec spec = standard_augmentation_spec();
  if (expansion > 0) spec.expansion_factor = expansion;
  const fs::path dir = fs::path(out_dir) / ("fold" + std::to_string(test_fold));
  const AugmentedSet set = expand(split.train_ids, m, spec, seed, dir);
  write_lineage_csv(dir / "lineage.csv", set);
  write_split_json(dir / "split.json", split);
  std::cout << "augmented " << split.train_ids.size() << " sources x " << spec.expansion_factor
            << " -> " << set.items.size() << " images under " << dir.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path) {
  const store::RunConfig cfg = store::parse_runconfig(config_path);
  const store::TrainSummary summary = store::execute_run(cfg);
  int failures = 0;
  for (const auto& o : summary.outcomes) {
    std::cout << (o.ok ? "ok   " : "FAIL ") << o.config_name << " fold " << o.fold;
    if (!o.ok) std::cout << "  (" << o.error << ")";
    std::cout << "\n";
    if (!o.ok) ++failures;
  }
  std::cout << "results under " << summary.run_root.string() << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_evaluate(const std::string& manifest_path, const std::vector<std::string>& predictions,
                 const std::string& run_dir, const std::string& out) {
  const Manifest m = read_manifest_csv(manifest_path);
  if (!run_dir.empty()) {
    const MetricReport r = report::evaluate_external_model(run_dir, m);
    write_metrics_json(out, r);
    std::cout << "accuracy " << fmt_double(r.accuracy, 4) << " auc " << fmt_double(r.auc, 4)
              << " -> " << out << "\n";
    return 0;
  }
  if (predictions.empty()) fail("evaluate needs --predictions or --run-dir");
  if (predictions.size() == 1) {
    const MetricReport r = report::evaluate_external_predictions(predictions[0], m);
    write_metrics_json(out, r);
    std::cout << "accuracy " << fmt_double(r.accuracy, 4) << " auc " << fmt_double(r.auc, 4)
              << " -> " << out << "\n";
    return 0;
  }
  std::vector<fs::path> paths(predictions.begin(), predictions.end());
  const auto [reports, agg] = report::evaluate_external_ensemble(paths, m);
  json j = json::object();
  for (size_t i = 0; i < reports.size(); ++i) {
    json sub;
    for (const auto& name : metric_names()) {
      bool defined = true;
      const double v = metric_value(reports[i], name, &defined);
      sub[name] = defined ? json(v) : json(nullptr);
    }
    j["submodels"].push_back(sub);
  }
  for (const auto& [metric, ms] : agg.metrics)
    j["aggregate"][metric] = ms.n == 0
                                 ? json({{"mean", nullptr}, {"std", nullptr}, {"folds", 0}})
                                 : json({{"mean", ms.mean}, {"std", ms.stdev}, {"folds", ms.n}});
  write_text_file(out, j.dump(2) + "\n");
  const auto* acc = agg.find("accuracy");
  std::cout << reports.size() << " sub-models, accuracy " << fmt_double(acc->mean, 4) << " ± "
            << fmt_double(acc->stdev, 4) << " -> " << out << "\n";
  return 0;
}

int cmd_compare(const std::string& accuracy_csv, double alpha, const std::string& out_dir) {
  const AccuracyMatrix acc = read_accuracy_csv(accuracy_csv);
  const RankMatrix ranks = rank_models(acc);
  const CDResult cd = nemenyi_cd(ranks, alpha);
  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "cd_diagram.svg", render_cd_diagram(ranks, cd));
  write_cd_result_json(fs::path(out_dir) / "cd_result.json", ranks, cd);
  std::cout << "friedman chi2 " << fmt_double(cd.friedman_statistic, 4) << " p "
            << fmt_double(cd.friedman_p, 6) << " CD " << fmt_double(cd.critical_difference, 4)
            << " -> " << out_dir << "\n";
  return 0;
}

int cmd_profile(std::vector<std::string> names, bool all, bool runtime, const std::string& out) {
  const auto& reg = backbones::Registry::instance();
  if (all) names = reg.names();
  if (names.empty()) fail("profile needs --backbones or --all");
  std::vector<profile::ComplexityReport> reports;
  for (const auto& name : names) {
    nn::Model m = transfer::attach_head(reg.build(name), transfer::HeadSpec{}, 0);
    profile::ComplexityReport r;
    if (runtime) {
      m.init_weights(1);
      const auto& d = reg.descriptor(name);
      nn::LabeledImageSet stream;
      stream.height = d.input_h;
      stream.width = d.input_w;
      Rng rng(7);
      for (int i = 0; i < 8; ++i) {
        std::vector<float> img(size_t(d.input_h) * d.input_w * 3);
        for (auto& v : img) v = float(rng.next_below(256));
        stream.push(std::move(img), i % 2);
      }
      std::vector<float> probe(size_t(d.input_h) * d.input_w * 3, 127.0f);
      transfer::set_unfrozen_suffix(m, d.total_layers);
      r = profile::measure_runtime_profile(m, stream, probe);
      if (r.timing_variance_warning)
        std::cerr << "warning: high timing variance for " << name
                  << " (busy machine?); raw samples kept in the report\n";
    } else {
      r = profile::structural_report(m);
    }
    r.model_name = name;
    reports.push_back(std::move(r));
    std::cout << name << ": " << fmt_double(reports.back().params_millions, 2) << "M params, "
              << fmt_double(reports.back().flops_giga, 3) << "G flops\n";
  }
  profile::write_complexity_csv(out, reports);
  std::cout << "-> " << out << "  (" << profile::flop_convention_notes() << ")\n";
  return 0;
}

int cmd_explain(const std::string& run_dir, const std::string& image_path, int target_class,
                const std::string& out_prefix) {
  const json meta = json::parse(read_text_file(fs::path(run_dir) / "run_meta.json"));
  const std::string backbone = meta.at("backbone").get<std::string>();
  const auto& reg = backbones::Registry::instance();
  nn::Model model = transfer::attach_head(reg.build(backbone), transfer::HeadSpec{}, 0);
  model.load_weights(fs::path(run_dir) / "weights.lbw");

  const Image original = load_image(image_path);
  const Image resized = resize_bilinear(original, model.input_shape.w, model.input_shape.h);
  std::vector<float> flat(resized.px.size());
  for (size_t i = 0; i < flat.size(); ++i) flat[i] = float(resized.px[i]);

  const explain::Heatmap map = explain::grad_cam(model, flat, target_class);
  const Image blended = explain::overlay(map, original);
  save_png(out_prefix + "_cam.png", blended);
  explain::write_heatmap_csv(out_prefix + "_cam.csv", map);
  std::cout << "grad-cam " << map.h << "x" << map.w << " from layer '" << map.source_layer
            << "' -> " << out_prefix << "_cam.{png,csv}\n";
  return 0;
}

int cmd_report(const std::string& run_root) {
  store::regenerate_summaries(run_root);
  std::cout << "summaries regenerated under " << run_root << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // LYMEBENCH_THREADS selects the compute backend's thread pool
  if (const char* threads_env = std::getenv("LYMEBENCH_THREADS")) {
    const int n = std::atoi(threads_env);
    if (n > 0) {
      Eigen::setNbThreads(n);
#ifdef _OPENMP
      omp_set_num_threads(n);
#endif
    }
  }

  CLI::App app{"transfer-learning benchmark harness for two-class lesion images"};
  app.require_subcommand(1);

  // ingest
  std::string root, out = "manifest.csv";
  int threshold = 0;
  bool no_dedup = false;
  auto* ingest = app.add_subcommand("ingest", "scan class directories into a manifest");
  ingest->add_option("--root", root, "dataset root with EM/ and Confuser/ subdirectories")
      ->required();
  ingest->add_option("--out", out, "manifest csv path");
  ingest->add_option("--dedup-threshold", threshold, "max Hamming distance for duplicates");
  ingest->add_flag("--no-dedup", no_dedup, "keep near-duplicates");

  // split
  std::string manifest_path, foldplan_out = "foldplan.json";
  int k = 5;
  uint64_t seed = 0;
  auto* split_cmd = app.add_subcommand("split", "stratified k-fold plan from a manifest");
  split_cmd->add_option("--manifest", manifest_path, "manifest csv")->required();
  split_cmd->add_option("--k", k, "fold count");
  split_cmd->add_option("--seed", seed, "rng seed");
  split_cmd->add_option("--out", foldplan_out, "fold plan json path");

  // augment
  std::string aug_manifest, aug_plan, aug_out = "augmented";
  int test_fold = 0, expansion = -1;
  double val_fraction = 0.10;
  uint64_t aug_seed = 0;
  auto* augment_cmd = app.add_subcommand("augment", "materialize training-set replicas");
  augment_cmd->add_option("--manifest", aug_manifest, "manifest csv")->required();
  augment_cmd->add_option("--foldplan", aug_plan, "fold plan json")->required();
  augment_cmd->add_option("--test-fold", test_fold, "rotation's test fold");
  augment_cmd->add_option("--val-fraction", val_fraction, "validation holdout fraction");
  augment_cmd->add_option("--seed", aug_seed, "rng seed");
  augment_cmd->add_option("--out-dir", aug_out, "output directory");
  augment_cmd->add_option("--expansion", expansion, "replicas per source (default 20)");

  // train
  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "run a declarative experiment config");
  train_cmd->add_option("--config", config_path, "runconfig file")->required();

  // evaluate
  std::string eval_manifest, eval_run_dir, eval_out = "metrics.json";
  std::vector<std::string> eval_predictions;
  auto* eval_cmd = app.add_subcommand("evaluate", "score external predictions or a model");
  eval_cmd->add_option("--manifest", eval_manifest, "manifest csv")->required();
  eval_cmd->add_option("--predictions", eval_predictions,
                       "prediction csv(s); several files aggregate as an ensemble");
  eval_cmd->add_option("--run-dir", eval_run_dir, "trained run directory");
  eval_cmd->add_option("--out", eval_out, "output json");

  // compare
  std::string acc_csv, cmp_out = ".";
  double alpha = 0.1;
  auto* cmp_cmd = app.add_subcommand("compare", "Friedman/Nemenyi + CD diagram");
  cmp_cmd->add_option("--accuracy-csv", acc_csv, "model,fold,accuracy table")->required();
  cmp_cmd->add_option("--alpha", alpha, "significance level (0.05 or 0.1)");
  cmp_cmd->add_option("--out-dir", cmp_out, "output directory");

  // profile
  std::vector<std::string> prof_names;
  bool prof_all = false, prof_runtime = false;
  std::string prof_out = "complexity.csv";
  auto* prof_cmd = app.add_subcommand("profile", "parameter/FLOP (and timing) profile");
  prof_cmd->add_option("--backbones", prof_names, "backbone names")->delimiter(',');
  prof_cmd->add_flag("--all", prof_all, "profile every registered backbone");
  prof_cmd->add_flag("--runtime", prof_runtime, "also measure timings on this machine");
  prof_cmd->add_option("--out", prof_out, "complexity csv path");

  // explain
  std::string exp_run, exp_image, exp_prefix = "explain";
  int exp_class = 1;
  auto* exp_cmd = app.add_subcommand("explain", "Grad-CAM heatmap for one image");
  exp_cmd->add_option("--run-dir", exp_run, "trained run directory")->required();
  exp_cmd->add_option("--image", exp_image, "input image")->required();
  exp_cmd->add_option("--class", exp_class, "target class (1 = positive)");
  exp_cmd->add_option("--out-prefix", exp_prefix, "output path prefix");

  // report
  std::string report_root;
  auto* report_cmd = app.add_subcommand("report", "regenerate summaries and figures");
  report_cmd->add_option("--run-root", report_root, "results/<run_id> directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(root, out, threshold, no_dedup);
    if (*split_cmd) return cmd_split(manifest_path, k, seed, foldplan_out);
    if (*augment_cmd)
      return cmd_augment(aug_manifest, aug_plan, test_fold, val_fraction, aug_seed, aug_out,
                         expansion);
    if (*train_cmd) return cmd_train(config_path);
    if (*eval_cmd) return cmd_evaluate(eval_manifest, eval_predictions, eval_run_dir, eval_out);
    if (*cmp_cmd) return cmd_compare(acc_csv, alpha, cmp_out);
    if (*prof_cmd) return cmd_profile(prof_names, prof_all, prof_runtime, prof_out);
    if (*exp_cmd) return cmd_explain(exp_run, exp_image, exp_class, exp_prefix);
    if (*report_cmd) return cmd_report(report_root);
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
