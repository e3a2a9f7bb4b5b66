#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <vector>

#include "nvzeno/cce.hpp"
#include "nvzeno/errors.hpp"
#include "nvzeno/experiment.hpp"

using namespace nvzeno;

namespace {

Bath bath_of(std::uint64_t seed, std::size_t n, double r_min = kDefaultExperimentRMin) {
  BathConfig c;
  c.seed = seed;
  c.n_spins = n;
  c.r_min = r_min;
  return sample_bath(c);
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

CceOptions order(int m, int threads = 1) {
  CceOptions o;
  o.order = m;
  o.threads = threads;
  return o;
}

}  // namespace

TEST_SUITE("cce") {

TEST_CASE("cluster counts follow binomial sums") {
  const Bath b4 = bath_of(1, 4);
  const auto set = enumerate_clusters(b4, 2);
  CHECK(set.levels.at(0).count() == 4);
  CHECK(set.levels.at(1).count() == 6);
  CHECK(set.total() == 10);
  CHECK(count_all_subsets(100, 4) == 100 + 4950 + 161700 + 3921225);
  CHECK(enumerate_clusters(bath_of(1, 3), 3).total() == 7);
}

TEST_CASE("clusters are lexicographic, unique and closed under subsets") {
  const Bath bath = bath_of(2, 9, 1e-9);
  SelectionPolicy policy;
  policy.max_diameter = 1.2e-9;
  const auto set = enumerate_clusters(bath, 3, policy);
  REQUIRE(set.levels.size() == 3);
  CHECK(set.levels[0].count() == 9);  // singletons are always present
  for (const auto& level : set.levels) {
    for (std::size_t i = 0; i < level.count(); ++i) {
      const auto c = level.cluster(i);
      CHECK(std::is_sorted(c.begin(), c.end()));
      CHECK(std::adjacent_find(c.begin(), c.end()) == c.end());
      if (i) {
        const auto p = level.cluster(i - 1);
        CHECK(std::lexicographical_compare(p.begin(), p.end(), c.begin(), c.end()));
      }
      CHECK(level.find(c) == i);
      if (level.size > 1) {
        for (std::size_t drop = 0; drop < level.size; ++drop) {
          std::vector<SiteIndex> sub;
          for (std::size_t j = 0; j < level.size; ++j)
            if (j != drop) sub.push_back(c[j]);
          CHECK(set.levels[level.size - 2].find(sub).has_value());
        }
        for (std::size_t a = 0; a < level.size; ++a)
          for (std::size_t b = a + 1; b < level.size; ++b)
            CHECK((bath.sites[c[a]].r - bath.sites[c[b]].r).norm() <= 1.2e-9);
      }
    }
  }
  CHECK(set.total() < count_all_subsets(9, 3));
}

TEST_CASE("enumerate_clusters errors") {
  const Bath bath = bath_of(1, 5);
  CHECK_THROWS_AS(enumerate_clusters(bath, 0), ConfigError);
  CHECK_THROWS_AS(enumerate_clusters(bath, 6), ConfigError);
  SelectionPolicy tight;
  tight.cluster_budget = 10;
  CHECK_THROWS_AS(enumerate_clusters(bath, 3, tight), BudgetExceeded);
}

TEST_CASE("correlation factors: singleton, unit sub-factors, guard") {
  const std::size_t nt = 4;
  CorrelationTable table(nt);
  ClusterLevel singles{1, {0, 1, 2}};
  table.add_level(singles, std::vector<double>(3 * nt, 1.0));
  const std::vector<double> p{1.0, 0.9, 0.5, 0.25};
  const std::vector<SiteIndex> one{1};
  const std::vector<SiteIndex> two{0, 2};

  // Singletons never divide.
  CHECK(correlation_factor(one, CorrelationTable(nt), p) == p);
  CHECK(correlation_factor(two, table, p) == p);

  CorrelationTable guarded(nt);
  guarded.add_level(singles, {1, 1e-12, 0.5, 0.5, 1, 1, 1, 1, 1, 0.5, 0.5, 0.5});
  FactorStats stats;
  const auto f = correlation_factor(two, guarded, p, &stats);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 1.0);  // |sub-factor| < 1e-9: frozen to 1
  CHECK(stats.guarded == 1);
  CHECK(f[2] == doctest::Approx(0.5 / (0.5 * 0.5)));

  const std::vector<SiteIndex> missing{0, 1, 2};
  CHECK_THROWS_AS(correlation_factor(missing, table, p), std::logic_error);
}

TEST_CASE("telescoping: N = 2 factors reconstruct P_{1,2}") {
  const NvParams nv;
  const Bath bath = bath_of(3, 2);
  const auto times = uniform_grid(2e-4, 60);
  const auto p12 = exact_survival_full(nv, bath, times).values;
  const auto cce = cce_survival(nv, bath, times, order(2)).curve.values;
  CHECK(max_diff(p12, cce) <= 1e-12);
}

TEST_CASE("M = N matches the exact oracle for N <= 6") {
  const NvParams nv;
  const auto times = uniform_grid(2e-4, 200);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::uint64_t seed : {11ULL, 12ULL}) {
      const Bath bath = bath_of(seed + 100 * n, n);
      const auto exact = exact_survival_full(nv, bath, times).values;
      const auto res = cce_survival(nv, bath, times, order(static_cast<int>(n)));
      CHECK(max_diff(exact, res.curve.values) <= 1e-10);
      CHECK(res.diagnostics.guard_count == 0);
      CHECK(res.curve.method == "cce(" + std::to_string(n) + ")");
    }
  }
}

TEST_CASE("M = 1 on a single-spin bath equals the 6-dimensional propagation") {
  const NvParams nv;
  const Bath bath = bath_of(4, 1);
  const auto times = uniform_grid(2e-4, 50);
  const auto h = build_cluster_hamiltonian(nv, bath, std::vector<std::size_t>{0});
  CHECK(max_diff(survival_exact(h, times).values, cce_survival(nv, bath, times, order(1)).curve.values) == 0.0);
}

TEST_CASE("error against the oracle usually shrinks with M") {
  const NvParams nv;
  const auto times = uniform_grid(2e-4, 100);
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    const Bath bath = bath_of(seed, 6);
    const auto exact = exact_survival_full(nv, bath, times).values;
    double previous = INFINITY;
    for (int m = 1; m <= 6; ++m) {
      const double err = max_diff(exact, cce_survival(nv, bath, times, order(m)).curve.values);
      if (err > previous + 1e-12)
        MESSAGE("seed " << seed << ": error rose from " << previous << " to " << err << " at M = " << m);
      previous = err;
    }
    CHECK(previous <= 1e-10);
  }
}

TEST_CASE("relabelling bath sites leaves P^(M) unchanged") {
  const NvParams nv;
  const Bath bath = bath_of(5, 7);
  Bath shuffled = bath;
  std::mt19937 gen(3);
  std::shuffle(shuffled.sites.begin(), shuffled.sites.end(), gen);
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled.sites[i].index = i;
  const auto times = uniform_grid(2e-4, 80);
  for (int m : {2, 3}) {
    const auto a = cce_survival(nv, bath, times, order(m)).curve.values;
    const auto b = cce_survival(nv, shuffled, times, order(m)).curve.values;
    // Reordering the basis changes the rounding of every eigendecomposition.
    CHECK(max_diff(a, b) <= 1e-8);
  }
}

TEST_CASE("results are bit-identical across thread counts and reruns") {
  const NvParams nv;
  const Bath bath = bath_of(6, 10);
  const auto times = uniform_grid(2e-4, 64);
  const auto one = cce_survival(nv, bath, times, order(3, 1)).curve.values;
  const auto four = cce_survival(nv, bath, times, order(3, 4)).curve.values;
  const auto again = cce_survival(nv, bath, times, order(3, 4)).curve.values;
  CHECK(one == four);
  CHECK(four == again);
}

TEST_CASE("diagnostics and numerical health") {
  const NvParams nv;
  const Bath bath = bath_of(7, 8);
  const auto res = cce_survival(nv, bath, uniform_grid(2e-4, 50), order(3));
  CHECK(res.diagnostics.clusters == count_all_subsets(8, 3));
  CHECK(res.diagnostics.max_unitarity_residual <= kUnitarityTolerance);
  CHECK(res.diagnostics.denominator_residual <= kDenominatorTolerance);
  CHECK(res.curve.values.front() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK_THROWS_AS(cce_survival(nv, bath, std::vector<double>{}, order(2)), ConfigError);
}

TEST_CASE("the block cache reproduces a run") {
  const NvParams nv;
  const Bath bath = bath_of(8, 8);
  const auto times = uniform_grid(2e-4, 40);
  const auto dir = std::filesystem::temp_directory_path() / "nvzeno_cce_cache_test";
  std::filesystem::remove_all(dir);
  CceOptions o = order(3);
  o.cache_dir = dir;
  const auto first = cce_survival(nv, bath, times, o);
  const auto second = cce_survival(nv, bath, times, o);
  CHECK(first.diagnostics.cache_hits == 0);
  CHECK(second.diagnostics.cache_hits == first.diagnostics.clusters);
  CHECK(first.curve.values == second.curve.values);
  // A different grid must not pick up stale blocks.
  const auto other = cce_survival(nv, bath, uniform_grid(1e-4, 40), o);
  CHECK(other.diagnostics.cache_hits == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exact oracle: empty bath and cap") {
  const NvParams nv;
  const auto times = uniform_grid(2e-4, 20);
  for (double p : exact_survival_full(nv, Bath{}, times).values) CHECK(p == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(exact_survival_full(nv, bath_of(1, 5), times, 4), BudgetExceeded);
}

}  // TEST_SUITE
