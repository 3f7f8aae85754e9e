#include <doctest.h>

#include <cmath>

#include "lymebench/metrics.hpp"
#include "lymebench/common.hpp"

using namespace lymebench;

namespace {

// Straight-from-formula oracle, written independently of the implementation.
struct OracleReport {
  double accuracy, sensitivity, specificity, precision, npv, mcc, kappa, f1;
  bool lr_pos_defined, lr_neg_defined;
  double lr_pos, lr_neg;
};

OracleReport oracle(long long tp, long long fp, long long tn, long long fn) {
  const double TP = double(tp), FP = double(fp), TN = double(tn), FN = double(fn);
  const double N = TP + FP + TN + FN;
  OracleReport o{};
  o.accuracy = (TP + TN) / N;
  o.sensitivity = (TP + FN) > 0 ? TP / (TP + FN) : 0.0;
  o.specificity = (TN + FP) > 0 ? TN / (TN + FP) : 0.0;
  o.precision = (TP + FP) > 0 ? TP / (TP + FP) : 0.0;
  o.npv = (TN + FN) > 0 ? TN / (TN + FN) : 0.0;
  const double den = std::sqrt((TP + FP) * (TP + FN) * (TN + FP) * (TN + FN));
  o.mcc = den > 0 ? (TP * TN - FP * FN) / den : 0.0;
  const double po = (TP + TN) / N;
  const double pe = ((TP + FP) * (TP + FN) + (FN + TN) * (FP + TN)) / (N * N);
  o.kappa = pe == 1.0 ? 0.0 : (po - pe) / (1.0 - pe);
  o.lr_pos_defined = o.specificity < 1.0;
  if (o.lr_pos_defined) o.lr_pos = o.sensitivity / (1.0 - o.specificity);
  o.lr_neg_defined = o.specificity > 0.0;
  if (o.lr_neg_defined) o.lr_neg = (1.0 - o.sensitivity) / o.specificity;
  o.f1 = (o.precision + o.sensitivity) > 0
             ? 2.0 * o.precision * o.sensitivity / (o.precision + o.sensitivity)
             : 0.0;
  return o;
}

// Exhaustive pairwise AUC with ties counting one half.
double pairwise_auc(const PredictionSet& p) {
  double wins = 0.0;
  long long pairs = 0;
  for (const auto& pos : p.entries) {
    if (pos.true_label != 1) continue;
    for (const auto& neg : p.entries) {
      if (neg.true_label != 0) continue;
      ++pairs;
      if (pos.score > neg.score) wins += 1.0;
      else if (pos.score == neg.score) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

PredictionSet random_set(Rng& rng, int n, int score_levels = 0) {
  PredictionSet p;
  for (int i = 0; i < n; ++i) {
    double score = score_levels > 0
                       ? double(rng.next_below(uint64_t(score_levels))) / (score_levels - 1)
                       : rng.next_double();
    p.entries.push_back({"id" + std::to_string(i), int(rng.next_below(2)), score});
  }
  return p;
}

}  // namespace

TEST_CASE("confusion matrix partitions the set with ties counted positive") {
  PredictionSet p;
  p.entries = {{"a", 1, 1.0}, {"b", 1, 1.0}, {"c", 1, 1.0}};
  ConfusionMatrix cm = compute_confusion(p);
  CHECK(cm.tp == 3);
  CHECK(cm.fp + cm.tn + cm.fn == 0);

  PredictionSet q;
  q.entries = {{"a", 1, 0.5}, {"b", 0, 0.5}};  // boundary scores predict positive
  cm = compute_confusion(q);
  CHECK(cm.tp == 1);
  CHECK(cm.fp == 1);

  PredictionSet mixed;
  mixed.entries = {{"a", 1, 0.9}, {"b", 0, 0.7}, {"c", 1, 0.2}, {"d", 0, 0.1}};
  cm = compute_confusion(mixed);
  CHECK(cm.tp == 1);  // a
  CHECK(cm.fp == 1);  // b
  CHECK(cm.fn == 1);  // c
  CHECK(cm.tn == 1);  // d

  CHECK_THROWS_AS(compute_confusion(PredictionSet{}), Error);
  PredictionSet dup;
  dup.entries = {{"a", 1, 0.9}, {"a", 0, 0.1}};
  CHECK_THROWS_AS(compute_confusion(dup), Error);
}

TEST_CASE("the documented worked example evaluates exactly") {
  MetricReport r = compute_metric_report({88, 19, 81, 12});
  CHECK(r.sensitivity == doctest::Approx(0.88).epsilon(1e-12));
  CHECK(r.specificity == doctest::Approx(0.81).epsilon(1e-12));
  CHECK(r.accuracy == doctest::Approx(0.845).epsilon(1e-12));
  REQUIRE(r.lr_pos.has_value());
  REQUIRE(r.lr_neg.has_value());
  CHECK(*r.lr_pos == doctest::Approx(0.88 / 0.19).epsilon(1e-9));
  CHECK(*r.lr_neg == doctest::Approx(0.12 / 0.81).epsilon(1e-9));
}

TEST_CASE("perfect and degenerate confusion matrices use the documented sentinels") {
  MetricReport perfect = compute_metric_report({10, 0, 10, 0});
  CHECK(perfect.mcc == doctest::Approx(1.0));
  CHECK(perfect.kappa == doctest::Approx(1.0));
  CHECK(perfect.f1 == doctest::Approx(1.0));
  CHECK_FALSE(perfect.lr_pos.has_value());  // specificity 1 -> flagged undefined

  MetricReport single = compute_metric_report({5, 0, 0, 5});  // FP = TN = 0
  CHECK(single.mcc == 0.0);
  CHECK_FALSE(single.lr_neg.has_value());  // specificity 0

  // all predicted positive, mixed truth
  MetricReport allpos = compute_metric_report({5, 5, 0, 0});
  CHECK(allpos.mcc == 0.0);
  CHECK(allpos.kappa == 0.0);  // po == pe
}

TEST_CASE("1000 random confusion matrices agree with the formula oracle to 1e-9") {
  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    long long tp = (long long)rng.next_below(200), fp = (long long)rng.next_below(200);
    long long tn = (long long)rng.next_below(200), fn = (long long)rng.next_below(200);
    if (tp + fp + tn + fn == 0) tp = 1;
    const MetricReport r = compute_metric_report({tp, fp, tn, fn});
    const OracleReport o = oracle(tp, fp, tn, fn);
    CHECK(std::abs(r.accuracy - o.accuracy) < 1e-9);
    CHECK(std::abs(r.sensitivity - o.sensitivity) < 1e-9);
    CHECK(std::abs(r.specificity - o.specificity) < 1e-9);
    CHECK(std::abs(r.precision - o.precision) < 1e-9);
    CHECK(std::abs(r.npv - o.npv) < 1e-9);
    CHECK(std::abs(r.mcc - o.mcc) < 1e-9);
    CHECK(std::abs(r.kappa - o.kappa) < 1e-9);
    CHECK(std::abs(r.f1 - o.f1) < 1e-9);
    CHECK(r.lr_pos.has_value() == o.lr_pos_defined);
    if (o.lr_pos_defined) CHECK(std::abs(*r.lr_pos - o.lr_pos) < 1e-9);
    CHECK(r.lr_neg.has_value() == o.lr_neg_defined);
    if (o.lr_neg_defined) CHECK(std::abs(*r.lr_neg - o.lr_neg) < 1e-9);

    // range invariants
    for (double v : {r.accuracy, r.sensitivity, r.specificity, r.precision, r.npv, r.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.mcc >= -1.0 - 1e-12);
    CHECK(r.mcc <= 1.0 + 1e-12);
    CHECK(r.kappa >= -1.0 - 1e-12);
    CHECK(r.kappa <= 1.0 + 1e-12);
  }
}

TEST_CASE("sensitivity equals specificity on the label-and-prediction-flipped set") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    PredictionSet p = random_set(rng, 40);
    bool haspos = false, hasneg = false;
    for (auto& e : p.entries) (e.true_label ? haspos : hasneg) = true;
    if (!haspos || !hasneg) continue;
    PredictionSet flipped;
    for (const auto& e : p.entries) {
      // flipping labels and predictions: score' = just below the complement for
      // boundary scores so predicted-positive flips exactly
      double s = 1.0 - e.score;
      if (e.score >= 0.5) s = std::min(s, 0.49999999);
      else s = std::max(s, 0.5);
      flipped.entries.push_back({e.id, 1 - e.true_label, s});
    }
    const MetricReport a = compute_metric_report(compute_confusion(p));
    const MetricReport b = compute_metric_report(compute_confusion(flipped));
    CHECK(a.sensitivity == doctest::Approx(b.specificity).epsilon(1e-12));
    CHECK(a.specificity == doctest::Approx(b.sensitivity).epsilon(1e-12));
  }
}

TEST_CASE("roc/auc: trivial cases and the exhaustive pairwise oracle") {
  PredictionSet sep;
  for (int i = 0; i < 5; ++i) sep.entries.push_back({"p" + std::to_string(i), 1, 0.9});
  for (int i = 0; i < 5; ++i) sep.entries.push_back({"n" + std::to_string(i), 0, 0.1});
  CHECK(compute_roc_auc(sep).second == doctest::Approx(1.0).epsilon(1e-12));

  PredictionSet ties;
  for (int i = 0; i < 6; ++i)
    ties.entries.push_back({"t" + std::to_string(i), i % 2, 0.42});
  CHECK(compute_roc_auc(ties).second == doctest::Approx(0.5).epsilon(1e-12));

  PredictionSet six;
  six.entries = {{"a", 1, 0.9}, {"b", 0, 0.8}, {"c", 1, 0.8},
                 {"d", 0, 0.3}, {"e", 1, 0.2}, {"f", 0, 0.2}};
  auto [roc, auc] = compute_roc_auc(six);
  CHECK(auc == doctest::Approx(pairwise_auc(six)).epsilon(1e-12));
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == doctest::Approx(1.0));
  CHECK(roc.back().tpr == doctest::Approx(1.0));

  PredictionSet single;
  single.entries = {{"a", 1, 0.9}, {"b", 1, 0.1}};
  CHECK_THROWS_WITH_AS(compute_roc_auc(single), doctest::Contains("AUC undefined"), Error);
}

TEST_CASE("trapezoidal auc equals the rank statistic on 200 random sets") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + int(rng.next_below(199));
    // quantized scores force plenty of ties
    PredictionSet p = random_set(rng, n, 2 + int(rng.next_below(11)));
    bool haspos = false, hasneg = false;
    for (auto& e : p.entries) (e.true_label ? haspos : hasneg) = true;
    if (!haspos || !hasneg) continue;
    const double auc = compute_roc_auc(p).second;
    CHECK(std::abs(auc - pairwise_auc(p)) < 1e-12);
  }
}

TEST_CASE("fold aggregation uses the sample standard deviation") {
  std::vector<MetricReport> reports;
  for (double acc : {0.80, 0.82, 0.84, 0.86, 0.88}) {
    MetricReport r;
    r.cm = {1, 1, 1, 1};
    r.accuracy = acc;
    r.lr_pos = 2.0;
    r.lr_neg = 0.5;
    reports.push_back(r);
  }
  const FoldAggregate agg = aggregate_folds(reports);
  const MeanStd* acc = agg.find("accuracy");
  REQUIRE(acc);
  CHECK(acc->mean == doctest::Approx(0.84).epsilon(1e-12));
  CHECK(acc->stdev == doctest::Approx(0.031622776601).epsilon(1e-9));

  // identical reports -> zero variance
  std::vector<MetricReport> same(3, reports[0]);
  for (const auto& [name, ms] : aggregate_folds(same).metrics)
    CHECK(ms.stdev == doctest::Approx(0.0));

  CHECK_THROWS_AS(aggregate_folds({reports[0]}), Error);
}

TEST_CASE("likelihood ratios aggregate as per-fold ratios, not ratios of means") {
  // two folds engineered so mean(LR+) != mean(sens)/(1-mean(spec))
  MetricReport f1 = compute_metric_report({90, 40, 60, 10});   // sens .9, spec .6
  MetricReport f2 = compute_metric_report({50, 5, 95, 50});    // sens .5, spec .95
  const FoldAggregate agg = aggregate_folds({f1, f2});
  const double direct = (*f1.lr_pos + *f2.lr_pos) / 2.0;
  const MeanStd* lr = agg.find("lr_pos");
  REQUIRE(lr);
  CHECK(lr->n == 2);
  CHECK(lr->mean == doctest::Approx(direct).epsilon(1e-12));
  const double mean_sens = (f1.sensitivity + f2.sensitivity) / 2.0;
  const double mean_spec = (f1.specificity + f2.specificity) / 2.0;
  CHECK(std::abs(lr->mean - mean_sens / (1.0 - mean_spec)) > 0.5);
}

TEST_CASE("undefined likelihood ratios are skipped in aggregation and serialized null") {
  MetricReport defined = compute_metric_report({8, 2, 8, 2});
  MetricReport undef = compute_metric_report({10, 0, 10, 0});  // spec 1 -> LR+ undefined
  const FoldAggregate agg = aggregate_folds({defined, undef});
  const MeanStd* lr = agg.find("lr_pos");
  REQUIRE(lr);
  CHECK(lr->n == 1);
  CHECK(lr->mean == doctest::Approx(*defined.lr_pos));

  const auto dir = fs::path("test_tmp/metrics_json");
  fs::create_directories(dir);
  write_metrics_json(dir / "m.json", undef);
  const std::string text = read_text_file(dir / "m.json");
  CHECK(text.find("\"lr_pos\": null") != std::string::npos);
  const MetricReport back = read_metrics_json(dir / "m.json");
  CHECK_FALSE(back.lr_pos.has_value());
  CHECK(back.accuracy == doctest::Approx(undef.accuracy));
  CHECK(back.cm.tp == undef.cm.tp);
}

TEST_CASE("kappa is exactly zero when observed equals chance agreement") {
  // TP=FP=TN=FN -> po = 0.5, pe = 0.5
  const MetricReport r = compute_metric_report({25, 25, 25, 25});
  CHECK(r.kappa_po == doctest::Approx(r.kappa_pe).epsilon(1e-15));
  CHECK(r.kappa == 0.0);
}
