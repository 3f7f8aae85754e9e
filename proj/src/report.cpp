#include "lymebench/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lymebench/backbones.hpp"
#include "lymebench/transfer.hpp"

namespace lymebench::report {

using nlohmann::json;

namespace {

// lower-is-better metrics flip the best-in-column marker
bool lower_is_better(const std::string& metric) { return metric == "lr_neg"; }

std::string cell_text(const MeanStd& ms) {
  if (ms.n == 0) return "undefined";
  return fmt_double(ms.mean, 4) + " ± " + fmt_double(ms.stdev, 4);
}

std::vector<int> best_row_per_metric(const std::vector<ConfigAggregate>& rows) {
  std::vector<int> best(metric_names().size(), -1);
  for (size_t m = 0; m < metric_names().size(); ++m) {
    const std::string& metric = metric_names()[m];
    double best_v = 0.0;
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].folds_found < 2) continue;
      const MeanStd* ms = rows[r].aggregate.find(metric);
      if (!ms || ms->n == 0) continue;
      const bool better =
          best[m] < 0 || (lower_is_better(metric) ? ms->mean < best_v : ms->mean > best_v);
      if (better) {
        best[m] = int(r);
        best_v = ms->mean;
      }
    }
  }
  return best;
}

}  // namespace

std::string render_metric_table_csv(const std::vector<ConfigAggregate>& rows) {
  std::ostringstream out;
  out << "model";
  for (const auto& metric : metric_names()) out << ',' << metric << ",best";
  out << ",status\n";
  const auto best = best_row_per_metric(rows);
  for (size_t r = 0; r < rows.size(); ++r) {
    out << csv_escape(rows[r].name);
    for (size_t m = 0; m < metric_names().size(); ++m) {
      if (rows[r].folds_found < 2) {
        out << ",,";
        continue;
      }
      const MeanStd* ms = rows[r].aggregate.find(metric_names()[m]);
      out << ',' << csv_escape(cell_text(*ms)) << ',' << (best[m] == int(r) ? "1" : "0");
    }
    out << ',' << (rows[r].complete ? "complete" : "incomplete") << '\n';
  }
  return out.str();
}

std::string render_metric_table_text(const std::vector<ConfigAggregate>& rows) {
  const auto best = best_row_per_metric(rows);
  size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  const size_t cell_w = 20;

  std::ostringstream out;
  out << std::string(name_w, ' ') << " ";
  for (const auto& metric : metric_names()) {
    std::string h = metric;
    if (h.size() > cell_w - 1) h = h.substr(0, cell_w - 1);
    out << h << std::string(cell_w - h.size(), ' ');
  }
  out << "\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    out << rows[r].name << std::string(name_w - rows[r].name.size(), ' ') << " ";
    for (size_t m = 0; m < metric_names().size(); ++m) {
      std::string cell;
      if (rows[r].folds_found < 2) {
        cell = "(incomplete)";
      } else {
        cell = cell_text(*rows[r].aggregate.find(metric_names()[m]));
        if (best[m] == int(r)) cell = "*" + cell;
      }
      if (cell.size() > cell_w - 1) cell = cell.substr(0, cell_w - 1);
      out << cell << std::string(cell_w - cell.size(), ' ');
    }
    out << "\n";
  }
  out << "\n* best value in column; cells are mean ± std over folds\n";
  return out.str();
}

std::vector<MetricTableRow> parse_metric_table_csv(const std::string& csv) {
  const auto lines = split(csv, '\n');
  if (lines.empty()) fail("empty metric table");
  const auto header = csv_parse_line(lines[0]);
  const size_t expected_cols = 1 + 2 * metric_names().size() + 1;
  if (header.size() != expected_cols || header[0] != "model")
    fail("unexpected metric table header");
  std::vector<MetricTableRow> rows;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_parse_line(lines[i]);
    if (f.size() != expected_cols) fail("bad metric table row");
    MetricTableRow row;
    row.name = f[0];
    for (size_t m = 0; m < metric_names().size(); ++m) {
      row.cells.push_back({metric_names()[m], f[1 + 2 * m]});
      if (f[2 + 2 * m] == "1") row.best.push_back(metric_names()[m]);
    }
    row.status = f.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// bubble chart
// ---------------------------------------------------------------------------
std::vector<BubbleEntry> join_bubble_entries(
    const std::vector<std::pair<std::string, double>>& accuracy_by_model,
    const std::vector<profile::ComplexityReport>& complexity,
    std::vector<std::string>* warnings) {
  std::map<std::string, const profile::ComplexityReport*> by_name;
  for (const auto& c : complexity) by_name[c.model_name] = &c;
  std::vector<BubbleEntry> out;
  for (const auto& [name, acc] : accuracy_by_model) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      if (warnings)
        warnings->push_back("model '" + name + "' has no complexity entry; omitted from chart");
      continue;
    }
    out.push_back({name, acc, it->second->flops_giga, it->second->params_millions});
  }
  return out;
}

std::string render_bubble_chart_svg(const std::vector<BubbleEntry>& entries) {
  if (entries.empty()) fail("bubble chart needs at least one entry");
  const double width = 760, height = 520;
  const double ml = 70, mr = 40, mt = 40, mb = 60;

  double min_f = entries[0].flops_giga, max_f = min_f;
  double min_a = entries[0].accuracy, max_a = min_a;
  double max_p = entries[0].params_millions;
  for (const auto& e : entries) {
    min_f = std::min(min_f, e.flops_giga);
    max_f = std::max(max_f, e.flops_giga);
    min_a = std::min(min_a, e.accuracy);
    max_a = std::max(max_a, e.accuracy);
    max_p = std::max(max_p, e.params_millions);
  }
  min_f = std::max(min_f, 1e-4);
  if (max_f <= min_f) max_f = min_f * 10.0;
  double lo_a = std::max(0.0, min_a - 0.05), hi_a = std::min(1.0, max_a + 0.05);
  if (hi_a <= lo_a) hi_a = lo_a + 0.01;

  auto x_of = [&](double flops) {
    const double lf = std::log10(std::max(flops, 1e-4));
    return ml + (lf - std::log10(min_f)) / (std::log10(max_f) - std::log10(min_f)) *
                    (width - ml - mr);
  };
  auto y_of = [&](double acc) {
    return height - mb - (acc - lo_a) / (hi_a - lo_a) * (height - mt - mb);
  };
  // bubble AREA proportional to parameter count
  auto r_of = [&](double params) { return std::sqrt(params / max_p) * 34.0 + 4.0; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_double(width, 0)
    << "\" height=\"" << fmt_double(height, 0) << "\" viewBox=\"0 0 " << fmt_double(width, 0)
    << " " << fmt_double(height, 0) << "\">\n";
  s << "<metadata id=\"data\">model,flops_giga,accuracy,params_millions\n";
  for (const auto& e : entries)
    s << e.name << ',' << fmt_double(e.flops_giga, 4) << ',' << fmt_double(e.accuracy, 4)
      << ',' << fmt_double(e.params_millions, 4) << '\n';
  s << "</metadata>\n";
  s << "<style>text{font-family:monospace;font-size:11px;fill:#000}</style>\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes
  s << "<line x1=\"" << fmt_double(ml, 1) << "\" y1=\"" << fmt_double(height - mb, 1)
    << "\" x2=\"" << fmt_double(width - mr, 1) << "\" y2=\"" << fmt_double(height - mb, 1)
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << fmt_double(ml, 1) << "\" y1=\"" << fmt_double(mt, 1) << "\" x2=\""
    << fmt_double(ml, 1) << "\" y2=\"" << fmt_double(height - mb, 1)
    << "\" stroke=\"black\"/>\n";
  // log-decade x ticks
  for (int d = int(std::floor(std::log10(min_f))); d <= int(std::ceil(std::log10(max_f)));
       ++d) {
    const double f = std::pow(10.0, d);
    if (f < min_f / 1.001 || f > max_f * 1.001) continue;
    const double x = x_of(f);
    s << "<line x1=\"" << fmt_double(x, 1) << "\" y1=\"" << fmt_double(height - mb, 1)
      << "\" x2=\"" << fmt_double(x, 1) << "\" y2=\"" << fmt_double(height - mb + 5, 1)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt_double(x - 10, 1) << "\" y=\"" << fmt_double(height - mb + 18, 1)
      << "\">" << fmt_double(f, f < 1 ? 1 : 0) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double a = lo_a + (hi_a - lo_a) * i / 5.0;
    const double y = y_of(a);
    s << "<line x1=\"" << fmt_double(ml - 5, 1) << "\" y1=\"" << fmt_double(y, 1) << "\" x2=\""
      << fmt_double(ml, 1) << "\" y2=\"" << fmt_double(y, 1) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt_double(8, 1) << "\" y=\"" << fmt_double(y + 4, 1) << "\">"
      << fmt_double(a * 100.0, 1) << "%</text>\n";
  }
  s << "<text x=\"" << fmt_double(width / 2 - 60, 1) << "\" y=\"" << fmt_double(height - 16, 1)
    << "\">FLOPs (giga, log scale)</text>\n";
  s << "<text x=\"8\" y=\"" << fmt_double(mt - 14, 1) << "\">accuracy</text>\n";

  // deterministic row order
  std::vector<const BubbleEntry*> order;
  for (const auto& e : entries) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const BubbleEntry* a, const BubbleEntry* b) { return a->name < b->name; });
  for (const BubbleEntry* e : order) {
    const double x = x_of(e->flops_giga), y = y_of(e->accuracy), r = r_of(e->params_millions);
    s << "<circle cx=\"" << fmt_double(x, 1) << "\" cy=\"" << fmt_double(y, 1) << "\" r=\""
      << fmt_double(r, 1)
      << "\" fill=\"steelblue\" fill-opacity=\"0.55\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt_double(x + r + 3, 1) << "\" y=\"" << fmt_double(y - r - 3, 1)
      << "\">" << e->name << " (" << fmt_double(e->flops_giga, 2) << "G, "
      << fmt_double(e->accuracy * 100.0, 1) << "%, " << fmt_double(e->params_millions, 2)
      << "M)</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------
// external evaluation
// ---------------------------------------------------------------------------
namespace {

void check_coverage(const PredictionSet& p, const Manifest& m) {
  std::map<std::string, bool> seen;
  for (const auto& e : p.entries) seen[e.id] = true;
  std::vector<std::string> missing;
  for (const auto& rec : m.records)
    if (!seen.count(rec.id)) missing.push_back(rec.id);
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size() && i < 10; ++i) {
      if (i) list += ", ";
      list += missing[i];
    }
    if (missing.size() > 10) list += ", ... (" + std::to_string(missing.size()) + " total)";
    fail("predictions do not cover the manifest; missing ids: " + list);
  }
}

}  // namespace

MetricReport evaluate_external_predictions(const fs::path& predictions_csv, const Manifest& m) {
  PredictionSet p = read_predictions_csv(predictions_csv);
  check_coverage(p, m);
  // restrict to the manifest and re-derive truth labels from it
  std::map<std::string, double> scores;
  for (const auto& e : p.entries) scores[e.id] = e.score;
  PredictionSet scoped;
  for (const auto& rec : m.records)
    scoped.entries.push_back(
        {rec.id, transfer::binary_label(m, rec.label), scores.at(rec.id)});
  return evaluate_predictions(scoped);
}

std::pair<std::vector<MetricReport>, FoldAggregate> evaluate_external_ensemble(
    const std::vector<fs::path>& prediction_csvs, const Manifest& m) {
  if (prediction_csvs.size() < 2)
    fail("ensemble evaluation needs at least two prediction files");
  std::vector<MetricReport> reports;
  for (const auto& path : prediction_csvs)
    reports.push_back(evaluate_external_predictions(path, m));
  return {reports, aggregate_folds(reports)};
}

MetricReport evaluate_external_model(const fs::path& run_dir, const Manifest& m) {
  const fs::path meta_path = run_dir / "run_meta.json";
  const fs::path weights_path = run_dir / "weights.lbw";
  if (!fs::exists(meta_path) || !fs::exists(weights_path))
    fail("run directory must contain run_meta.json and weights.lbw: " + run_dir.string());
  const json meta = json::parse(read_text_file(meta_path));
  const std::string backbone = meta.at("backbone").get<std::string>();

  const auto& reg = backbones::Registry::instance();
  nn::Model model = transfer::attach_head(reg.build(backbone), transfer::HeadSpec{}, 0);
  model.load_weights(weights_path);

  std::vector<std::string> ids;
  for (const auto& rec : m.records) ids.push_back(rec.id);
  PredictionSet p = transfer::predict_set(model, ids, m);
  return evaluate_predictions(p);
}

}  // namespace lymebench::report
