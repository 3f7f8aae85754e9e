#include "lymebench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lymebench {

using nlohmann::json;

void PredictionSet::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!(e.score >= 0.0 && e.score <= 1.0))
      fail("prediction score out of [0,1] for id " + e.id);
    if (e.true_label != 0 && e.true_label != 1)
      fail("prediction label must be 0 or 1 for id " + e.id);
    if (!ids.insert(e.id).second) fail("duplicate prediction id: " + e.id);
  }
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "accuracy", "sensitivity", "specificity", "precision", "npv", "mcc",
      "kappa",    "lr_pos",      "lr_neg",      "f1",        "auc"};
  return names;
}

const MeanStd* FoldAggregate::find(const std::string& name) const {
  for (const auto& [n, ms] : metrics)
    if (n == name) return &ms;
  return nullptr;
}

ConfusionMatrix compute_confusion(const PredictionSet& p) {
  if (p.entries.empty()) fail("compute_confusion: empty prediction set");
  p.validate();
  ConfusionMatrix cm;
  for (const auto& e : p.entries) {
    const bool pred_pos = e.score >= p.threshold;  // ties count as positive
    if (pred_pos && e.true_label == 1) ++cm.tp;
    else if (pred_pos && e.true_label == 0) ++cm.fp;
    else if (!pred_pos && e.true_label == 1) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

namespace {

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricReport compute_metric_report(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) fail("compute_metric_report: empty confusion matrix");
  const double tp = double(cm.tp), fp = double(cm.fp), tn = double(cm.tn), fn = double(cm.fn);
  const double n = tp + fp + tn + fn;

  MetricReport r;
  r.cm = cm;
  r.accuracy = (tp + tn) / n;
  r.sensitivity = safe_ratio(tp, tp + fn);
  r.specificity = safe_ratio(tn, tn + fp);
  r.precision = safe_ratio(tp, tp + fp);
  r.npv = safe_ratio(tn, tn + fn);

  const double mcc_den =
      std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  r.mcc = mcc_den == 0.0 ? 0.0 : (tp * tn - fp * fn) / mcc_den;

  // kappa: observed vs chance agreement from the two raters' marginals
  r.kappa_po = (tp + tn) / n;
  r.kappa_pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n);
  r.kappa = r.kappa_pe == 1.0 ? 0.0 : (r.kappa_po - r.kappa_pe) / (1.0 - r.kappa_pe);

  if (r.specificity < 1.0) r.lr_pos = r.sensitivity / (1.0 - r.specificity);
  if (r.specificity > 0.0) r.lr_neg = (1.0 - r.sensitivity) / r.specificity;

  const double pr = r.precision + r.sensitivity;
  r.f1 = pr == 0.0 ? 0.0 : 2.0 * r.precision * r.sensitivity / pr;
  return r;
}

std::pair<std::vector<RocPoint>, double> compute_roc_auc(const PredictionSet& p) {
  p.validate();
  long long npos = 0, nneg = 0;
  for (const auto& e : p.entries) (e.true_label == 1 ? npos : nneg)++;
  if (npos == 0 || nneg == 0) fail("AUC undefined: prediction set has a single class");

  std::vector<const Prediction*> sorted;
  sorted.reserve(p.entries.size());
  for (const auto& e : p.entries) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Prediction* a, const Prediction* b) { return a->score > b->score; });

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0, sorted.front()->score + 1.0});
  long long tp = 0, fp = 0;
  double auc = 0.0;
  size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i]->score;
    long long dtp = 0, dfp = 0;
    while (i < sorted.size() && sorted[i]->score == s) {
      (sorted[i]->true_label == 1 ? dtp : dfp)++;
      ++i;
    }
    const double tpr0 = double(tp) / double(npos), fpr0 = double(fp) / double(nneg);
    tp += dtp;
    fp += dfp;
    const double tpr1 = double(tp) / double(npos), fpr1 = double(fp) / double(nneg);
    auc += (fpr1 - fpr0) * (tpr1 + tpr0) / 2.0;  // trapezoid; tie groups move diagonally
    roc.push_back({fpr1, tpr1, s});
  }
  return {std::move(roc), auc};
}

MetricReport evaluate_predictions(const PredictionSet& p) {
  MetricReport r = compute_metric_report(compute_confusion(p));
  auto [roc, auc] = compute_roc_auc(p);
  r.roc = std::move(roc);
  r.auc = auc;
  return r;
}

FoldAggregate aggregate_folds(const std::vector<MetricReport>& reports) {
  if (reports.size() < 2) fail("aggregate_folds: need at least 2 fold reports");
  FoldAggregate agg;
  agg.k = int(reports.size());
  for (const auto& name : metric_names()) {
    std::vector<double> vals;
    for (const auto& r : reports) {
      bool defined = true;
      double v = metric_value(r, name, &defined);
      if (defined) vals.push_back(v);
    }
    MeanStd ms;
    ms.n = int(vals.size());
    if (!vals.empty()) {
      double sum = 0.0;
      for (double v : vals) sum += v;
      ms.mean = sum / double(vals.size());
      if (vals.size() >= 2) {
        double ss = 0.0;
        for (double v : vals) ss += (v - ms.mean) * (v - ms.mean);
        ms.stdev = std::sqrt(ss / double(vals.size() - 1));  // sample std, k-1 divisor
      }
    }
    agg.metrics.push_back({name, ms});
  }
  return agg;
}

double metric_value(const MetricReport& r, const std::string& name, bool* defined) {
  if (defined) *defined = true;
  if (name == "accuracy") return r.accuracy;
  if (name == "sensitivity") return r.sensitivity;
  if (name == "specificity") return r.specificity;
  if (name == "precision") return r.precision;
  if (name == "npv") return r.npv;
  if (name == "mcc") return r.mcc;
  if (name == "kappa") return r.kappa;
  if (name == "f1") return r.f1;
  if (name == "auc") return r.auc;
  if (name == "lr_pos") {
    if (r.lr_pos) return *r.lr_pos;
    if (defined) *defined = false;
    return 0.0;
  }
  if (name == "lr_neg") {
    if (r.lr_neg) return *r.lr_neg;
    if (defined) *defined = false;
    return 0.0;
  }
  fail("unknown metric name: " + name);
}

void write_metrics_json(const fs::path& path, const MetricReport& r) {
  json j;
  j["confusion"] = {{"tp", r.cm.tp}, {"fp", r.cm.fp}, {"tn", r.cm.tn}, {"fn", r.cm.fn}};
  for (const auto& name : metric_names()) {
    bool defined = true;
    double v = metric_value(r, name, &defined);
    if (defined) j[name] = v;
    else j[name] = nullptr;  // flagged-undefined likelihood ratio
  }
  j["kappa_po"] = r.kappa_po;
  j["kappa_pe"] = r.kappa_pe;
  write_text_file(path, j.dump(2) + "\n");
}

MetricReport read_metrics_json(const fs::path& path) {
  json j = json::parse(read_text_file(path));
  MetricReport r;
  r.cm.tp = j.at("confusion").at("tp").get<long long>();
  r.cm.fp = j.at("confusion").at("fp").get<long long>();
  r.cm.tn = j.at("confusion").at("tn").get<long long>();
  r.cm.fn = j.at("confusion").at("fn").get<long long>();
  r.accuracy = j.at("accuracy").get<double>();
  r.sensitivity = j.at("sensitivity").get<double>();
  r.specificity = j.at("specificity").get<double>();
  r.precision = j.at("precision").get<double>();
  r.npv = j.at("npv").get<double>();
  r.mcc = j.at("mcc").get<double>();
  r.kappa = j.at("kappa").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.auc = j.at("auc").get<double>();
  if (!j.at("lr_pos").is_null()) r.lr_pos = j.at("lr_pos").get<double>();
  if (!j.at("lr_neg").is_null()) r.lr_neg = j.at("lr_neg").get<double>();
  if (j.contains("kappa_po")) r.kappa_po = j.at("kappa_po").get<double>();
  if (j.contains("kappa_pe")) r.kappa_pe = j.at("kappa_pe").get<double>();
  return r;
}

void write_roc_csv(const fs::path& path, const std::vector<RocPoint>& roc) {
  std::ostringstream out;
  out << "fpr,tpr,threshold\n";
  for (const auto& pt : roc)
    out << fmt_shortest(pt.fpr) << ',' << fmt_shortest(pt.tpr) << ','
        << fmt_shortest(pt.threshold) << '\n';
  write_text_file(path, out.str());
}

void write_predictions_csv(const fs::path& path, const PredictionSet& p) {
  std::ostringstream out;
  out << "image_id,true_label,score\n";
  for (const auto& e : p.entries)
    out << csv_escape(e.id) << ',' << e.true_label << ',' << fmt_shortest(e.score) << '\n';
  write_text_file(path, out.str());
}

PredictionSet read_predictions_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "image_id,true_label,score")
    fail("unexpected predictions header in " + path.string());
  PredictionSet p;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = csv_parse_line(lines[i]);
    if (f.size() != 3) fail("bad predictions row in " + path.string());
    p.entries.push_back({f[0], std::stoi(f[1]), std::stod(f[2])});
  }
  p.validate();
  return p;
}

}  // namespace lymebench
