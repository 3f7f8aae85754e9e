#include <doctest.h>

#include <cmath>

#include "lymebench/stats.hpp"
#include "lymebench/common.hpp"

using namespace lymebench;

namespace {

AccuracyMatrix random_matrix(Rng& rng, int models, int folds, int levels = 0) {
  AccuracyMatrix a;
  a.folds = folds;
  for (int i = 0; i < models; ++i) {
    a.models.push_back("m" + std::to_string(i));
    std::vector<double> row;
    for (int f = 0; f < folds; ++f)
      row.push_back(levels > 0 ? double(rng.next_below(uint64_t(levels))) / (levels)
                               : rng.next_double());
    a.values.push_back(std::move(row));
  }
  return a;
}

// Monte-Carlo permutation oracle: within each fold the model assignment is
// exchangeable under the null, so permute columns within folds and count
// statistics at least as extreme.
double permutation_p_value(const AccuracyMatrix& a, int permutations, uint64_t seed) {
  const double observed = friedman_test(rank_models(a)).first;
  Rng rng(seed);
  int at_least = 0;
  AccuracyMatrix shuffled = a;
  for (int t = 0; t < permutations; ++t) {
    for (int f = 0; f < a.folds; ++f) {
      // Fisher-Yates over the models' values in fold f
      for (size_t i = a.models.size(); i > 1; --i) {
        const size_t j = size_t(rng.next_below(i));
        std::swap(shuffled.values[i - 1][size_t(f)], shuffled.values[j][size_t(f)]);
      }
    }
    const auto stat = friedman_test(rank_models(shuffled)).first;
    if (stat >= observed - 1e-12) ++at_least;
  }
  return double(at_least) / double(permutations);
}

// studentized range CDF (infinite df) by quadrature; oracle for the q table
double srange_cdf(double q, int k) {
  auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
  const double a = -9.0, b = 9.0 + q;
  const int n = 4000;
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + h * i;
    const double f = phi(z) * k * std::pow(Phi(z) - Phi(z - q), k - 1);
    s += f * ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return s * h / 3.0;
}

double srange_quantile(double p, int k) {
  double lo = 0.0, hi = 12.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (srange_cdf(mid, k) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("ranking: strict order, mean-rank ties and the rank-sum identity") {
  AccuracyMatrix a;
  a.models = {"x", "y", "z"};
  a.folds = 2;
  a.values = {{0.9, 0.9}, {0.8, 0.9}, {0.7, 0.7}};
  const RankMatrix r = rank_models(a);
  CHECK(r.ranks[0] == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(r.ranks[1] == std::vector<double>{1.5, 1.5, 3.0});
  CHECK(r.avg_rank[0] == doctest::Approx(1.25));

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const AccuracyMatrix m = random_matrix(rng, 5, 5, trial % 2 ? 4 : 0);
    const RankMatrix rm = rank_models(m);
    for (int f = 0; f < 5; ++f) {
      double sum = 0.0;
      for (double v : rm.ranks[size_t(f)]) sum += v;
      CHECK(sum == doctest::Approx(15.0).epsilon(1e-12));  // m(m+1)/2
    }
  }
}

TEST_CASE("ranking input validation") {
  AccuracyMatrix a;
  a.models = {"only"};
  a.folds = 3;
  a.values = {{0.5, 0.5, 0.5}};
  CHECK_THROWS_AS(rank_models(a), Error);
  AccuracyMatrix b;
  b.models = {"x", "y"};
  b.folds = 1;
  b.values = {{0.5}, {0.6}};
  CHECK_THROWS_AS(rank_models(b), Error);
  AccuracyMatrix c;
  c.models = {"x", "y"};
  c.folds = 2;
  c.values = {{0.5, 1.2}, {0.6, 0.4}};
  CHECK_THROWS_AS(rank_models(c), Error);
}

TEST_CASE("improving one model's accuracy never worsens its average rank") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    AccuracyMatrix a = random_matrix(rng, 4, 5);
    const RankMatrix before = rank_models(a);
    const size_t model = rng.next_below(4);
    const size_t fold = rng.next_below(5);
    a.values[model][fold] = std::min(1.0, a.values[model][fold] + rng.next_double() * 0.5);
    const RankMatrix after = rank_models(a);
    CHECK(after.avg_rank[model] <= before.avg_rank[model] + 1e-12);
  }
}

TEST_CASE("positive rescaling of accuracies leaves the ranking unchanged") {
  Rng rng(77);
  AccuracyMatrix a = random_matrix(rng, 5, 4);
  AccuracyMatrix b = a;
  for (auto& row : b.values)
    for (auto& v : row) v *= 0.5;
  const RankMatrix ra = rank_models(a), rb = rank_models(b);
  for (int f = 0; f < a.folds; ++f) CHECK(ra.ranks[size_t(f)] == rb.ranks[size_t(f)]);
}

TEST_CASE("friedman: no variation gives statistic 0 and p 1") {
  AccuracyMatrix a;
  a.models = {"x", "y", "z"};
  a.folds = 4;
  a.values = {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}};
  const auto [stat, p] = friedman_test(rank_models(a));
  CHECK(stat == 0.0);
  CHECK(p == 1.0);
}

TEST_CASE("chi-square survival function matches reference values") {
  CHECK(chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf(7.814727903251179, 3) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf(0.0, 5) == 1.0);
  CHECK(chi2_sf(100.0, 2) < 1e-20);
}

TEST_CASE("friedman p stays within 0.02 of the permutation oracle on 4x6 tables") {
  Rng rng(909);
  double worst = 0.0;
  for (int trial = 0; trial < 12; ++trial) {
    const AccuracyMatrix a = random_matrix(rng, 4, 6, trial % 3 == 0 ? 5 : 0);
    const double chi_p = friedman_test(rank_models(a)).second;
    const double perm_p = permutation_p_value(a, 4000, 1000 + uint64_t(trial));
    worst = std::max(worst, std::abs(chi_p - perm_p));
    INFO("trial " << trial << " chi2 p " << chi_p << " permutation p " << perm_p);
    CHECK(std::abs(chi_p - perm_p) <= 0.02);
  }
  MESSAGE("largest |chi2 p - permutation p| over the tables: " << worst);
}

TEST_CASE("nemenyi critical difference reproduces hand-substituted values") {
  // m=2, N=10
  {
    AccuracyMatrix a;
    a.models = {"x", "y"};
    a.folds = 10;
    Rng rng(3);
    a.values = {{}, {}};
    for (int f = 0; f < 10; ++f) {
      a.values[0].push_back(rng.next_double());
      a.values[1].push_back(rng.next_double());
    }
    const CDResult cd = nemenyi_cd(rank_models(a), 0.05);
    CHECK(cd.critical_difference ==
          doctest::Approx(1.959964 * std::sqrt(6.0 / 60.0)).epsilon(1e-12));
  }
  // m=5, N=5
  {
    Rng rng(4);
    const AccuracyMatrix a = random_matrix(rng, 5, 5);
    const CDResult cd = nemenyi_cd(rank_models(a), 0.1);
    CHECK(cd.critical_difference ==
          doctest::Approx(2.459516 * std::sqrt(5.0 * 6.0 / (6.0 * 5.0))).epsilon(1e-12));
  }
  // m=10, N=5
  {
    Rng rng(5);
    const AccuracyMatrix a = random_matrix(rng, 10, 5);
    const CDResult cd = nemenyi_cd(rank_models(a), 0.05);
    CHECK(cd.critical_difference ==
          doctest::Approx(3.163684 * std::sqrt(10.0 * 11.0 / 30.0)).epsilon(1e-12));
  }
}

TEST_CASE("the embedded q table matches the studentized-range quadrature oracle") {
  for (int m : {2, 3, 5, 8, 10, 15, 20, 25, 30}) {
    CHECK(nemenyi_q(0.05, m) ==
          doctest::Approx(srange_quantile(0.95, m) / std::sqrt(2.0)).epsilon(2e-4));
    CHECK(nemenyi_q(0.1, m) ==
          doctest::Approx(srange_quantile(0.90, m) / std::sqrt(2.0)).epsilon(2e-4));
  }
  CHECK_THROWS_WITH_AS(nemenyi_q(0.2, 5), doctest::Contains("0.05"), Error);
  CHECK_THROWS_AS(nemenyi_q(0.05, 31), Error);
}

TEST_CASE("identical accuracies leave every pair not significantly different") {
  AccuracyMatrix a;
  a.models = {"x", "y", "z"};
  a.folds = 5;
  a.values.assign(3, std::vector<double>(5, 0.8));
  const RankMatrix r = rank_models(a);
  const CDResult cd = nemenyi_cd(r, 0.1);
  CHECK(cd.pairwise_not_different.size() == 3);  // all C(3,2) pairs
  const auto cliques = cd_cliques(r, cd);
  REQUIRE(cliques.size() == 1);
  CHECK(cliques[0].size() == 3);
}

TEST_CASE("a rank gap beyond the critical difference separates the pair") {
  AccuracyMatrix a;
  a.models = {"good", "bad"};
  a.folds = 10;
  a.values.assign(2, {});
  for (int f = 0; f < 10; ++f) {
    a.values[0].push_back(0.9);
    a.values[1].push_back(0.1);
  }
  const RankMatrix r = rank_models(a);
  const CDResult cd = nemenyi_cd(r, 0.1);  // CD ~= 0.52, gap = 1
  CHECK(cd.pairwise_not_different.empty());
  CHECK(cd_cliques(r, cd).empty());
}

TEST_CASE("cliques satisfy the pairwise invariant and are never nested") {
  Rng rng(606);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 3 + int(rng.next_below(8));
    const AccuracyMatrix a = random_matrix(rng, m, 2 + int(rng.next_below(6)),
                                           trial % 2 ? 6 : 0);
    const RankMatrix r = rank_models(a);
    const CDResult cd = nemenyi_cd(r, trial % 2 ? 0.05 : 0.1);
    const auto cliques = cd_cliques(r, cd);
    for (const auto& clique : cliques) {
      CHECK(clique.size() >= 2);
      for (size_t i = 0; i < clique.size(); ++i)
        for (size_t j = i + 1; j < clique.size(); ++j)
          CHECK(std::abs(r.avg_rank[clique[i]] - r.avg_rank[clique[j]]) <
                cd.critical_difference);
    }
    for (size_t i = 0; i < cliques.size(); ++i)
      for (size_t j = 0; j < cliques.size(); ++j) {
        if (i == j) continue;
        const bool subset = std::all_of(cliques[i].begin(), cliques[i].end(), [&](size_t x) {
          return std::find(cliques[j].begin(), cliques[j].end(), x) != cliques[j].end();
        });
        CHECK_FALSE(subset);
      }
    // every not-different pair is covered by the pairwise list definition
    for (const auto& [x, y] : cd.pairwise_not_different)
      CHECK(std::abs(r.avg_rank[x] - r.avg_rank[y]) < cd.critical_difference);
  }
}

TEST_CASE("cd diagram svg is deterministic and carries its data table") {
  Rng rng(21);
  const AccuracyMatrix a = random_matrix(rng, 5, 5);
  const RankMatrix r = rank_models(a);
  const CDResult cd = nemenyi_cd(r, 0.1);
  const std::string svg1 = render_cd_diagram(r, cd);
  const std::string svg2 = render_cd_diagram(r, cd);
  CHECK(svg1 == svg2);
  CHECK(svg1.find("<metadata") != std::string::npos);
  CHECK(svg1.find("critical_difference") != std::string::npos);
  for (const auto& name : a.models) CHECK(svg1.find(name) != std::string::npos);
}

TEST_CASE("accuracy csv round-trips through the comparison entry point") {
  Rng rng(8);
  const AccuracyMatrix a = random_matrix(rng, 4, 3);
  const fs::path dir = "test_tmp/stats_csv";
  fs::create_directories(dir);
  write_accuracy_csv(dir / "acc.csv", a);
  const AccuracyMatrix back = read_accuracy_csv(dir / "acc.csv");
  CHECK(back.models == a.models);
  REQUIRE(back.folds == a.folds);
  for (size_t i = 0; i < a.values.size(); ++i)
    for (int f = 0; f < a.folds; ++f)
      CHECK(back.values[i][size_t(f)] == doctest::Approx(a.values[i][size_t(f)]).epsilon(1e-15));
}
