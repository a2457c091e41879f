#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pbf/progression.hpp"

using namespace pbf;

namespace {

std::vector<std::size_t> labels_of(const std::string& s) {
  std::vector<std::size_t> out;
  for (char c : s) {
    out.push_back(static_cast<std::size_t>(c - 'A'));
  }
  return out;
}

std::vector<std::size_t> multiset(std::initializer_list<std::size_t> sizes) {
  std::vector<std::size_t> out;
  std::size_t label = 0;
  for (auto c : sizes) {
    out.insert(out.end(), c, label++);
  }
  return out;
}

double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

// Exact probability that the cumulative fraction leaves the z band at
// position n, summed from the hypergeometric pmf.
double exact_outside(std::size_t N, std::size_t C, std::size_t n, double z) {
  const double sd = std::sqrt(static_cast<double>(n) * C / N * (1.0 - static_cast<double>(C) / N) *
                              static_cast<double>(N - n) / static_cast<double>(N - 1)) /
                    static_cast<double>(C);
  if (sd == 0.0) {
    return 0.0;
  }
  const double mean = static_cast<double>(n) / static_cast<double>(N);
  double p = 0.0;
  const std::size_t lo = n + C > N ? n + C - N : 0;
  for (std::size_t x = lo; x <= std::min(n, C); ++x) {
    const double frac = static_cast<double>(x) / static_cast<double>(C);
    if (std::abs(frac - mean) > z * sd) {
      p += std::exp(log_choose(C, x) + log_choose(N - C, n - x) - log_choose(N, n));
    }
  }
  return p;
}

}  // namespace

TEST_CASE("cumulative fractions") {
  SUBCASE("two clusters") {
    const auto s = cumulative_cluster_fraction(labels_of("AABB"));
    REQUIRE(s.clusters.size() == 2);
    CHECK(s.clusters[0].fraction == std::vector<double>{0.5, 1.0, 1.0, 1.0});
    CHECK(s.clusters[1].fraction == std::vector<double>{0.0, 0.0, 0.5, 1.0});
    CHECK(s.N == 4);
  }
  SUBCASE("single cluster") {
    const auto s = cumulative_cluster_fraction(labels_of("AAAAA"));
    for (std::size_t n = 1; n <= 5; ++n) {
      CHECK(s.clusters[0].fraction[n - 1] == doctest::Approx(static_cast<double>(n) / 5.0));
    }
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(cumulative_cluster_fraction({}), std::invalid_argument); }
}

TEST_CASE("series invariants hold on random orders") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto labels = multiset({7, 13, 2, 21});
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto s = cumulative_cluster_fraction(labels);
    std::size_t total = 0;
    for (const auto& c : s.clusters) {
      total += c.size;
      CHECK(std::is_sorted(c.fraction.begin(), c.fraction.end()));
      CHECK(c.fraction.front() >= 0.0);
      CHECK(c.fraction.back() == 1.0);
    }
    CHECK(total == s.N);
    for (std::size_t n = 1; n <= s.N; ++n) {
      std::size_t counted = 0;
      for (const auto& c : s.clusters) {
        counted += c.counts[n - 1];
      }
      CHECK(counted == n);
    }
  }
}

TEST_CASE("band endpoints and argument checks") {
  const std::vector<std::size_t> sizes{30, 70};
  const auto b = hypergeometric_bands(100, sizes);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(b.sigma[c][0] == 0.0);
    CHECK(b.sigma[c][100] == 0.0);
    for (double s : b.sigma[c]) {
      CHECK(s >= 0.0);
    }
  }
  CHECK(b.mean(0) == 0.0);
  CHECK(b.mean(100) == 1.0);

  const std::vector<std::size_t> zero{0, 100};
  CHECK_THROWS_AS(hypergeometric_bands(100, zero), std::invalid_argument);
  const std::vector<std::size_t> short_sum{30, 60};
  CHECK_THROWS_AS(hypergeometric_bands(100, short_sum), std::invalid_argument);
}

TEST_CASE("count sigma is symmetric in n and N - n") {
  const std::vector<std::size_t> sizes{11, 23, 3, 40};
  const auto b = hypergeometric_bands(77, sizes);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double C = static_cast<double>(sizes[c]);
    for (std::size_t n = 0; n <= 77; ++n) {
      CHECK(b.sigma[c][n] * C == doctest::Approx(b.sigma[c][77 - n] * C).epsilon(1e-12));
    }
  }
}

TEST_CASE("band sigma matches shuffle Monte Carlo") {
  const std::vector<std::size_t> sizes{50, 50};
  const auto b = hypergeometric_bands(100, sizes);
  CHECK(b.sigma[0][50] == doctest::Approx(0.0503).epsilon(1e-3));

  auto labels = multiset({50, 50});
  std::mt19937_64 rng(20200525);
  const int runs = 100000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int r = 0; r < runs; ++r) {
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto k = std::count(labels.begin(), labels.begin() + 50, std::size_t{0});
    const double f = static_cast<double>(k) / 50.0;
    sum += f;
    sum2 += f * f;
  }
  const double mean = sum / runs;
  const double sd = std::sqrt((sum2 - runs * mean * mean) / (runs - 1));
  const double se_sd = sd / std::sqrt(2.0 * (runs - 1));
  CHECK(std::abs(sd - b.sigma[0][50]) < 3.0 * se_sd);
  CHECK(std::abs(mean - 0.5) < 3.0 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("mean fraction under shuffling is n/N") {
  auto labels = multiset({15, 45});
  std::mt19937_64 rng(99);
  const std::size_t N = labels.size();
  std::vector<double> sum(N, 0.0);
  std::vector<double> sum2(N, 0.0);
  const int runs = 1000;
  for (int r = 0; r < runs; ++r) {
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto s = cumulative_cluster_fraction(labels);
    for (std::size_t n = 0; n < N; ++n) {
      const double f = s.clusters[0].fraction[n];
      sum[n] += f;
      sum2[n] += f * f;
    }
  }
  for (std::size_t n = 0; n + 1 < N; ++n) {
    const double m = sum[n] / runs;
    const double var = std::max(0.0, (sum2[n] - runs * m * m) / (runs - 1));
    const double se = std::sqrt(var / runs);
    CHECK(std::abs(m - static_cast<double>(n + 1) / static_cast<double>(N)) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("all of one cluster first is a 2 sigma excursion") {
  const auto s = cumulative_cluster_fraction(labels_of("AAAABBBB"));
  const auto b = hypergeometric_bands(s);
  CHECK(b.sigma[0][4] == doctest::Approx(std::sqrt(4 * 0.25 * 4 / 7.0) / 4).epsilon(1e-12));
  CHECK(b.sigma[0][4] == doctest::Approx(0.189).epsilon(1e-3));
  const std::vector<double> z{1.0, 2.0};
  const auto rep = scan_excursions(s, b, z);
  const auto& a = rep.clusters[0];
  CHECK(a.max_z_above == doctest::Approx(0.5 / b.sigma[0][4]));
  CHECK(a.max_z_above == doctest::Approx(2.65).epsilon(2e-3));
  REQUIRE_FALSE(a.by_level[1].empty());
  CHECK(a.by_level[1].front().sign == 1);
  CHECK(a.by_level[1].front().start <= 4);
  CHECK(a.by_level[1].front().end >= 4);
  // the mirror cluster lags by the same amount
  CHECK(rep.clusters[1].max_z_below == doctest::Approx(a.max_z_above));
  CHECK(rep.max_z == doctest::Approx(a.max_z_above));
}

TEST_CASE("a series on the mean line has no excursions") {
  const auto s = cumulative_cluster_fraction(labels_of("AAAAAA"));
  const std::vector<double> z{1.0, 2.0};
  const auto rep = scan_excursions(s, hypergeometric_bands(s), z);
  CHECK(rep.clusters[0].by_level[0].empty());
  CHECK(rep.clusters[0].by_level[1].empty());
  CHECK(rep.max_z == 0.0);
  CHECK(rep.to_table().rows.empty());
}

TEST_CASE("excursion scan rejects mismatched inputs") {
  const auto s = cumulative_cluster_fraction(labels_of("AABB"));
  const std::vector<std::size_t> sizes{3, 2};
  const std::vector<double> z{2.0};
  CHECK_THROWS_AS(scan_excursions(s, hypergeometric_bands(5, sizes), z), std::invalid_argument);
}

TEST_CASE("excursion intervals are ordered, disjoint and relabel invariant") {
  std::mt19937_64 rng(42);
  const std::vector<double> z{1.0, 2.0};
  for (int trial = 0; trial < 30; ++trial) {
    auto labels = multiset({40, 25, 60});
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto s = cumulative_cluster_fraction(labels);
    const auto rep = scan_excursions(s, hypergeometric_bands(s), z);
    CHECK(rep.max_z >= 0.0);
    for (const auto& c : rep.clusters) {
      for (const auto& runs : c.by_level) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
          CHECK(runs[i].start <= runs[i].end);
          if (i > 0) {
            CHECK(runs[i - 1].end < runs[i].start);
          }
        }
      }
    }

    // relabel 0 -> 2, 1 -> 0, 2 -> 1
    const std::vector<std::size_t> perm{2, 0, 1};
    std::vector<std::size_t> relabelled;
    for (auto l : labels) {
      relabelled.push_back(perm[l]);
    }
    const auto s2 = cumulative_cluster_fraction(relabelled);
    const auto rep2 = scan_excursions(s2, hypergeometric_bands(s2), z);
    CHECK(rep2.max_z == rep.max_z);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& a = rep.clusters[c];
      const auto& b = rep2.clusters[perm[c]];
      CHECK(a.max_z_above == b.max_z_above);
      CHECK(a.positions_beyond == b.positions_beyond);
      for (std::size_t l = 0; l < z.size(); ++l) {
        REQUIRE(a.by_level[l].size() == b.by_level[l].size());
        for (std::size_t i = 0; i < a.by_level[l].size(); ++i) {
          CHECK(a.by_level[l][i].start == b.by_level[l][i].start);
          CHECK(a.by_level[l][i].end == b.by_level[l][i].end);
          CHECK(a.by_level[l][i].sign == b.by_level[l][i].sign);
        }
      }
    }
  }
}

TEST_CASE("random orders leave the 2 sigma band at the exact hypergeometric rate") {
  const std::size_t N = 300;
  const std::vector<std::size_t> sizes{100, 200};
  double expected = 0.0;
  for (std::size_t c : sizes) {
    for (std::size_t n = 1; n <= N; ++n) {
      expected += exact_outside(N, c, n, 2.0);
    }
  }
  expected /= static_cast<double>(sizes.size() * N);

  auto labels = multiset({100, 200});
  std::mt19937_64 rng(1234);
  const std::vector<double> z{2.0};
  const int runs = 100;
  std::vector<double> frac;
  for (int r = 0; r < runs; ++r) {
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto s = cumulative_cluster_fraction(labels);
    frac.push_back(scan_excursions(s, hypergeometric_bands(s), z).fraction_beyond(0));
  }
  const double mean = std::accumulate(frac.begin(), frac.end(), 0.0) / runs;
  double var = 0.0;
  for (double f : frac) {
    var += (f - mean) * (f - mean);
  }
  const double se = std::sqrt(var / (runs - 1) / runs);
  CHECK(std::abs(mean - expected) <= 3.0 * se);
}

TEST_CASE("daily proportions") {
  const Day d1 = day_of(parse_timestamp("2020-05-20"));
  const Day d2 = day_of(parse_timestamp("2020-05-22"));
  const std::vector<std::pair<Day, std::size_t>> labelled{{d1, 0}, {d1, 1}, {d2, 1}};
  const auto p = daily_cluster_proportions(labelled);
  REQUIRE(p.days.size() == 2);
  CHECK(p.labels == std::vector<std::size_t>{0, 1});
  CHECK(p.days[0].shares == std::vector<double>{0.5, 0.5});
  CHECK(p.days[1].shares == std::vector<double>{0.0, 1.0});
  CHECK(p.days[1].n == 1);
  const auto t = p.to_table();
  CHECK(t.header == std::vector<std::string>{"date", "n", "cluster_0", "cluster_1"});
  CHECK(t.rows[0][0] == "2020-05-20");
  CHECK_THROWS_AS(daily_cluster_proportions({}), std::invalid_argument);
}

TEST_CASE("within-day shuffles") {
  std::vector<std::pair<Day, std::size_t>> ordered;
  const Day start = day_of(parse_timestamp("2020-05-01"));
  // one cluster per day: shuffling inside a day changes nothing
  for (int d = 0; d < 6; ++d) {
    for (int i = 0; i < 10; ++i) {
      ordered.emplace_back(start + std::chrono::days(d), static_cast<std::size_t>(d % 3));
    }
  }
  const auto fixed = within_day_shuffle_robustness(ordered, 10, 7);
  REQUIRE(fixed.size() == 3);
  for (const auto& r : fixed) {
    CHECK(r.min_max_z == r.max_max_z);
  }

  // mixed days: results vary but are reproducible from the seed
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> pick(0, 2);
  for (auto& p : ordered) {
    p.second = pick(rng);
  }
  const auto a = within_day_shuffle_robustness(ordered, 10, 7);
  const auto b = within_day_shuffle_robustness(ordered, 10, 7);
  for (std::size_t c = 0; c < a.size(); ++c) {
    CHECK(a[c].min_max_z <= a[c].max_max_z);
    CHECK(a[c].min_max_z == b[c].min_max_z);
    CHECK(a[c].max_max_z == b[c].max_max_z);
  }
}

TEST_CASE("progression table layout") {
  const auto s = cumulative_cluster_fraction(labels_of("ABCABC"));
  const auto t = progression_table(s, hypergeometric_bands(s));
  CHECK(t.header.size() == 2 + 3 * 5);
  CHECK(t.header[2] == "cluster_0_frac");
  CHECK(t.header[6] == "cluster_0_hi2");
  CHECK(t.rows.size() == 7);
  CHECK(t.rows.back()[1] == "1.000000");
}
