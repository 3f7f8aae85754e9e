#include "lymebench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace lymebench {

using nlohmann::json;

void AccuracyMatrix::validate() const {
  if (models.size() < 2) fail("accuracy matrix needs at least 2 models");
  if (folds < 2) fail("accuracy matrix needs at least 2 folds");
  if (values.size() != models.size()) fail("accuracy matrix row count mismatch");
  for (const auto& row : values) {
    if (int(row.size()) != folds) fail("accuracy matrix has missing cells");
    for (double v : row)
      if (!(v >= 0.0 && v <= 1.0)) fail("accuracy value out of [0,1]");
  }
}

RankMatrix rank_models(const AccuracyMatrix& a) {
  a.validate();
  const size_t m = a.models.size();
  RankMatrix r;
  r.models = a.models;
  r.folds = a.folds;
  r.ranks.assign(size_t(a.folds), std::vector<double>(m, 0.0));
  r.avg_rank.assign(m, 0.0);

  for (int f = 0; f < a.folds; ++f) {
    std::vector<size_t> order(m);
    for (size_t i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
      return a.values[x][size_t(f)] > a.values[y][size_t(f)];
    });
    size_t i = 0;
    while (i < m) {
      size_t j = i;
      while (j + 1 < m &&
             a.values[order[j + 1]][size_t(f)] == a.values[order[i]][size_t(f)])
        ++j;
      const double mean_rank = (double(i + 1) + double(j + 1)) / 2.0;  // ties share the mean
      for (size_t t = i; t <= j; ++t) r.ranks[size_t(f)][order[t]] = mean_rank;
      i = j + 1;
    }
  }
  for (size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (int f = 0; f < a.folds; ++f) s += r.ranks[size_t(f)][j];
    r.avg_rank[j] = s / double(a.folds);
  }
  return r;
}

// ---------------------------------------------------------------------------
// chi-square survival function via the regularized incomplete gamma function
// ---------------------------------------------------------------------------
namespace {

double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) fail("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

}  // namespace

double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return gamma_q(df / 2.0, x / 2.0);
}

namespace {

// Exact within-fold permutation tail for small designs. The tie-corrected
// statistic is a monotone function of the sum of squared rank sums, and each
// fold's rank multiset is fixed under permutation, so the exact p-value is
// P(sum R_j'^2 >= observed) over independent uniform arrangements per fold.
// Rank-sum vectors are kept sorted (models are exchangeable under the null),
// which keeps the state space tiny for m <= 6.
bool exact_friedman_p(const RankMatrix& r, double* p_out) {
  const size_t m = r.models.size();
  const int n = r.folds;
  if (m > 6 || n > 12) return false;

  // scaled-by-2 integer ranks so mean ranks from ties stay exact
  std::vector<std::vector<int>> fold_ranks;
  fold_ranks.assign(size_t(n), std::vector<int>(m, 0));
  for (int f = 0; f < n; ++f)
    for (size_t j = 0; j < m; ++j)
      fold_ranks[size_t(f)][j] = int(std::lround(2.0 * r.ranks[size_t(f)][j]));

  long long observed = 0;
  for (size_t j = 0; j < m; ++j) {
    long long rj = 0;
    for (int f = 0; f < n; ++f) rj += fold_ranks[size_t(f)][j];
    observed += rj * rj;
  }

  std::map<std::vector<int>, double> states;
  states[std::vector<int>(m, 0)] = 1.0;
  for (int f = 0; f < n; ++f) {
    std::vector<int> arrangement = fold_ranks[size_t(f)];
    std::sort(arrangement.begin(), arrangement.end());
    std::vector<std::vector<int>> arrangements;
    do {
      arrangements.push_back(arrangement);
    } while (std::next_permutation(arrangement.begin(), arrangement.end()));

    std::map<std::vector<int>, double> next;
    for (const auto& [state, weight] : states) {
      for (const auto& a : arrangements) {
        std::vector<int> s = state;
        for (size_t j = 0; j < m; ++j) s[j] += a[j];
        std::sort(s.begin(), s.end());
        next[s] += weight;
      }
    }
    states.swap(next);
    if (states.size() > 2000000) return false;  // bail out to the asymptotic path
  }

  double total = 0.0, tail = 0.0;
  for (const auto& [state, weight] : states) {
    long long ss = 0;
    for (int v : state) ss += (long long)v * v;
    total += weight;
    if (ss >= observed) tail += weight;
  }
  *p_out = tail / total;
  return true;
}

}  // namespace

std::pair<double, double> friedman_test(const RankMatrix& r) {
  const size_t m = r.models.size();
  const int n = r.folds;
  if (m < 2 || n < 1) fail("friedman_test: degenerate rank matrix");

  double ssbn = 0.0;
  for (size_t j = 0; j < m; ++j) {
    double rj = 0.0;
    for (int f = 0; f < n; ++f) rj += r.ranks[size_t(f)][j];
    ssbn += rj * rj;
  }
  double ties = 0.0;
  for (int f = 0; f < n; ++f) {
    std::map<double, int> groups;
    for (size_t j = 0; j < m; ++j) ++groups[r.ranks[size_t(f)][j]];
    for (const auto& [rank, t] : groups) ties += double(t) * (double(t) * t - 1.0);
  }
  const double dm = double(m);
  const double correction = 1.0 - ties / (dm * (dm * dm - 1.0) * double(n));
  double chisq = 12.0 / (dm * double(n) * (dm + 1.0)) * ssbn - 3.0 * double(n) * (dm + 1.0);
  if (correction <= 0.0) return {0.0, 1.0};  // every fold fully tied
  chisq = std::max(0.0, chisq / correction);

  // Exact permutation tail where enumerable; the chi-square approximation is
  // off by several hundredths at benchmark-sized tables like 4x6.
  double exact_p = 0.0;
  if (exact_friedman_p(r, &exact_p)) return {chisq, exact_p};
  return {chisq, chi2_sf(chisq, dm - 1.0)};
}

// ---------------------------------------------------------------------------
// Nemenyi critical values: infinite-df studentized range quantile / sqrt(2).
// m = 2..20 transcribed from the standard published table (Demsar 2006,
// "Statistical comparisons of classifiers over multiple data sets", as
// circulated in the Orange/scmamp implementations); m = 21..30 evaluated from
// the studentized range CDF by quadrature and bisection, which reproduces the
// published entries to 1e-6 (see the table oracle in the test suite).
// ---------------------------------------------------------------------------
namespace {

constexpr double kQ05[29] = {
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948319, 3.030879,
    3.101730, 3.163684, 3.218654, 3.268004, 3.312739, 3.353618, 3.391230,
    3.426041, 3.458425, 3.488685, 3.517073, 3.543799, 3.569040, 3.592946,
    3.615646, 3.637252, 3.657861, 3.677556, 3.696413, 3.714498, 3.731869,
    3.748578};

constexpr double kQ10[29] = {
    1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884,
    2.854606, 2.919889, 2.977768, 3.029694, 3.076733, 3.119693, 3.159199,
    3.195743, 3.229723, 3.261461, 3.291224, 3.319233, 3.345676, 3.370712,
    3.394477, 3.417089, 3.438651, 3.459253, 3.478971, 3.497878, 3.516033,
    3.533492};

}  // namespace

double nemenyi_q(double alpha, int m) {
  if (m < 2 || m > 30)
    fail("nemenyi_q: embedded table covers 2 <= m <= 30, got m=" + std::to_string(m));
  if (alpha == 0.05) return kQ05[m - 2];
  if (alpha == 0.1) return kQ10[m - 2];
  fail("nemenyi_q: supported significance levels are 0.05 and 0.1");
}

CDResult nemenyi_cd(const RankMatrix& r, double alpha) {
  const size_t m = r.models.size();
  CDResult cd;
  cd.alpha = alpha;
  auto [stat, p] = friedman_test(r);
  cd.friedman_statistic = stat;
  cd.friedman_p = p;
  cd.critical_difference =
      nemenyi_q(alpha, int(m)) * std::sqrt(double(m) * (double(m) + 1.0) / (6.0 * r.folds));
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j)
      if (std::abs(r.avg_rank[i] - r.avg_rank[j]) < cd.critical_difference)
        cd.pairwise_not_different.push_back({i, j});
  return cd;
}

std::vector<std::vector<size_t>> cd_cliques(const RankMatrix& r, const CDResult& cd) {
  const size_t m = r.models.size();
  std::vector<size_t> order(m);
  for (size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return r.avg_rank[a] < r.avg_rank[b]; });

  std::vector<std::vector<size_t>> cliques;
  size_t prev_end = 0;
  bool have_prev = false;
  for (size_t i = 0; i < m; ++i) {
    size_t j = i;
    while (j + 1 < m &&
           r.avg_rank[order[j + 1]] - r.avg_rank[order[i]] < cd.critical_difference)
      ++j;
    if (j == i) continue;                  // singleton: no bar
    if (have_prev && j <= prev_end) continue;  // contained in the previous clique
    std::vector<size_t> clique(order.begin() + long(i), order.begin() + long(j) + 1);
    cliques.push_back(std::move(clique));
    prev_end = j;
    have_prev = true;
  }
  return cliques;
}

// ---------------------------------------------------------------------------
// SVG rendering. Everything is computed from the inputs with fixed formatting
// so repeated runs emit byte-identical files.
// ---------------------------------------------------------------------------
namespace {

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_cd_diagram(const RankMatrix& r, const CDResult& cd) {
  const size_t m = r.models.size();
  if (m < 2) fail("render_cd_diagram: need at least 2 models");

  std::vector<size_t> order(m);
  for (size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return r.avg_rank[a] < r.avg_rank[b]; });

  const auto cliques = cd_cliques(r, cd);

  const double name_w = 230.0, axis_y = 70.0, row_h = 18.0;
  const double x0 = name_w, x1 = x0 + 420.0;
  auto rank_x = [&](double rank) {
    return x0 + (rank - 1.0) / (double(m) - 1.0 + 1e-12) * (x1 - x0);
  };

  // clique bars stacked in rows below the axis
  std::vector<std::pair<double, double>> bar_span;
  std::vector<int> bar_row;
  {
    std::vector<double> row_max_x;
    for (const auto& clique : cliques) {
      double lo = r.avg_rank[clique.front()], hi = r.avg_rank[clique.back()];
      double xa = rank_x(lo) - 3, xb = rank_x(hi) + 3;
      int row = 0;
      while (row < int(row_max_x.size()) && xa <= row_max_x[size_t(row)] + 4) ++row;
      if (row == int(row_max_x.size())) row_max_x.push_back(xb);
      else row_max_x[size_t(row)] = xb;
      bar_span.push_back({xa, xb});
      bar_row.push_back(row);
    }
  }
  int n_bar_rows = 0;
  for (int row : bar_row) n_bar_rows = std::max(n_bar_rows, row + 1);

  const double names_top = axis_y + 14.0 + n_bar_rows * 10.0 + 12.0;
  const size_t n_left = (m + 1) / 2;
  const size_t n_right = m - n_left;
  const double height = names_top + double(std::max(n_left, n_right)) * row_h + 16.0;
  const double width = x1 + name_w;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_double(width, 0)
    << "\" height=\"" << fmt_double(height, 0) << "\" viewBox=\"0 0 " << fmt_double(width, 0)
    << " " << fmt_double(height, 0) << "\">\n";
  s << "<metadata id=\"data\">model,avg_rank\n";
  for (size_t pos = 0; pos < m; ++pos)
    s << svg_escape(r.models[order[pos]]) << ',' << fmt_double(r.avg_rank[order[pos]], 6)
      << '\n';
  s << "critical_difference," << fmt_double(cd.critical_difference, 6) << '\n';
  s << "</metadata>\n";
  s << "<style>text{font-family:monospace;font-size:12px;fill:#000}</style>\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axis with integer ticks
  s << "<line x1=\"" << fmt_double(x0, 2) << "\" y1=\"" << fmt_double(axis_y, 2) << "\" x2=\""
    << fmt_double(x1, 2) << "\" y2=\"" << fmt_double(axis_y, 2)
    << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (size_t t = 1; t <= m; ++t) {
    double x = rank_x(double(t));
    s << "<line x1=\"" << fmt_double(x, 2) << "\" y1=\"" << fmt_double(axis_y - 4, 2)
      << "\" x2=\"" << fmt_double(x, 2) << "\" y2=\"" << fmt_double(axis_y, 2)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    s << "<text x=\"" << fmt_double(x - 4, 2) << "\" y=\"" << fmt_double(axis_y - 8, 2) << "\">"
      << t << "</text>\n";
  }

  // CD reference bar
  {
    double xa = rank_x(1.0), xb = rank_x(std::min(1.0 + cd.critical_difference, double(m)));
    double y = axis_y - 34.0;
    s << "<line x1=\"" << fmt_double(xa, 2) << "\" y1=\"" << fmt_double(y, 2) << "\" x2=\""
      << fmt_double(xb, 2) << "\" y2=\"" << fmt_double(y, 2)
      << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double xe : {xa, xb})
      s << "<line x1=\"" << fmt_double(xe, 2) << "\" y1=\"" << fmt_double(y - 3, 2)
        << "\" x2=\"" << fmt_double(xe, 2) << "\" y2=\"" << fmt_double(y + 3, 2)
        << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << fmt_double(xb + 8, 2) << "\" y=\"" << fmt_double(y + 4, 2)
      << "\">CD = " << fmt_double(cd.critical_difference, 4) << "</text>\n";
  }

  // clique bars
  for (size_t b = 0; b < cliques.size(); ++b) {
    double y = axis_y + 12.0 + bar_row[b] * 10.0;
    s << "<line x1=\"" << fmt_double(bar_span[b].first, 2) << "\" y1=\"" << fmt_double(y, 2)
      << "\" x2=\"" << fmt_double(bar_span[b].second, 2) << "\" y2=\"" << fmt_double(y, 2)
      << "\" stroke=\"black\" stroke-width=\"4\"/>\n";
  }

  // model names with connector lines: best half left, rest right
  for (size_t pos = 0; pos < m; ++pos) {
    const size_t idx = order[pos];
    const bool left = pos < n_left;
    const size_t slot = left ? pos : pos - n_left;
    // on the right side the worst model sits on top (classic layout)
    const double name_y =
        names_top + double(left ? slot : (n_right - 1 - slot)) * row_h + 10.0;
    const double mx = rank_x(r.avg_rank[idx]);
    const std::string label =
        svg_escape(r.models[idx]) + " (" + fmt_double(r.avg_rank[idx], 4) + ")";
    double tx = left ? 8.0 : x1 + 12.0;
    double lx = left ? name_w - 6.0 : x1 + 6.0;
    if (left) {
      s << "<text x=\"" << fmt_double(tx, 2) << "\" y=\"" << fmt_double(name_y + 4, 2) << "\">"
        << label << "</text>\n";
    } else {
      s << "<text x=\"" << fmt_double(tx, 2) << "\" y=\"" << fmt_double(name_y + 4, 2) << "\">"
        << label << "</text>\n";
    }
    // connector: horizontal to below the model's axis position, then up
    s << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\""
      << fmt_double(lx, 2) << "," << fmt_double(name_y, 2) << " " << fmt_double(mx, 2) << ","
      << fmt_double(name_y, 2) << " " << fmt_double(mx, 2) << "," << fmt_double(axis_y, 2)
      << "\"/>\n";
  }

  s << "</svg>\n";
  return s.str();
}

AccuracyMatrix read_accuracy_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "model,fold,accuracy")
    fail("unexpected accuracy csv header in " + path.string());
  std::map<std::string, std::map<int, double>> cells;
  std::vector<std::string> model_order;
  int max_fold = -1;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = csv_parse_line(lines[i]);
    if (f.size() != 3) fail("bad accuracy csv row in " + path.string());
    if (!cells.count(f[0])) model_order.push_back(f[0]);
    int fold = std::stoi(f[1]);
    cells[f[0]][fold] = std::stod(f[2]);
    max_fold = std::max(max_fold, fold);
  }
  AccuracyMatrix a;
  a.models = model_order;
  a.folds = max_fold + 1;
  for (const auto& model : model_order) {
    std::vector<double> row;
    for (int f = 0; f <= max_fold; ++f) {
      auto it = cells[model].find(f);
      if (it == cells[model].end())
        fail("accuracy csv missing cell: model " + model + " fold " + std::to_string(f));
      row.push_back(it->second);
    }
    a.values.push_back(std::move(row));
  }
  a.validate();
  return a;
}

void write_accuracy_csv(const fs::path& path, const AccuracyMatrix& a) {
  std::ostringstream out;
  out << "model,fold,accuracy\n";
  for (size_t i = 0; i < a.models.size(); ++i)
    for (int f = 0; f < a.folds; ++f)
      out << csv_escape(a.models[i]) << ',' << f << ',' << fmt_shortest(a.values[i][size_t(f)])
          << '\n';
  write_text_file(path, out.str());
}

void write_cd_result_json(const fs::path& path, const RankMatrix& r, const CDResult& cd) {
  json j;
  j["friedman_statistic"] = cd.friedman_statistic;
  j["friedman_p"] = cd.friedman_p;
  j["alpha"] = cd.alpha;
  j["critical_difference"] = cd.critical_difference;
  json ranks = json::object();
  for (size_t i = 0; i < r.models.size(); ++i) ranks[r.models[i]] = r.avg_rank[i];
  j["average_ranks"] = ranks;
  json cliques = json::array();
  for (const auto& clique : cd_cliques(r, cd)) {
    json names = json::array();
    for (size_t idx : clique) names.push_back(r.models[idx]);
    cliques.push_back(names);
  }
  j["cliques"] = cliques;
  json pairs = json::array();
  for (const auto& [i, jdx] : cd.pairwise_not_different)
    pairs.push_back({r.models[i], r.models[jdx]});
  j["pairwise_not_different"] = pairs;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace lymebench
