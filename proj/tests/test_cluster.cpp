#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "mixtures.hpp"
#include "pbf/cluster.hpp"

using namespace pbf;

namespace {

Matrix blobs(std::size_t per, const std::vector<std::vector<double>>& centers, double sd, std::uint64_t seed,
             std::vector<std::size_t>* truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  const std::size_t d = centers.front().size();
  Matrix x(per * centers.size(), d);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t i = 0; i < per; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        x(c * per + i, j) = centers[c][j] + g(rng);
      }
      if (truth) {
        truth->push_back(c);
      }
    }
  }
  return x;
}

// Partition as a set of member sets, independent of label numbering.
std::set<std::set<std::size_t>> partition(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].insert(i);
  }
  std::set<std::set<std::size_t>> out;
  for (auto& [k, g] : groups) {
    out.insert(g);
  }
  return out;
}

double partition_sse(const Matrix& x, const std::vector<std::size_t>& labels, std::size_t k) {
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> mean(x.cols(), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (labels[i] == c) {
        ++n;
        for (std::size_t j = 0; j < x.cols(); ++j) {
          mean[j] += x(i, j);
        }
      }
    }
    if (n == 0) {
      return std::numeric_limits<double>::infinity();
    }
    for (auto& m : mean) {
      m /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (labels[i] == c) {
        total += squared_distance(x.row(i), mean);
      }
    }
  }
  return total;
}

}  // namespace

TEST_CASE("normalization divides by the sample standard deviation") {
  RawMatrix raw{{"r1", "r2", "r3"}, {"a", "b"}, Matrix::from_rows({{2, 5}, {4, 5}, {6, 5}})};
  const auto f = normalize_features(raw);
  CHECK(f.col_ids == std::vector<std::string>{"a"});
  CHECK(f.dropped_columns == std::vector<std::string>{"b"});
  CHECK(f.scales[0] == doctest::Approx(2.0));
  CHECK(f.values(0, 0) == doctest::Approx(1.0));
  CHECK(f.values(2, 0) == doctest::Approx(3.0));

  RawMatrix same{{"r1", "r2", "r3"}, {"a", "b"}, Matrix::from_rows({{1, 2}, {1, 2}, {3, 0}})};
  const auto g = normalize_features(same);
  CHECK(std::equal(g.values.row(0).begin(), g.values.row(0).end(), g.values.row(1).begin()));

  RawMatrix flat{{"r1", "r2"}, {"a"}, Matrix::from_rows({{1}, {1}})};
  CHECK_THROWS_AS(normalize_features(flat), DataError);
  RawMatrix tiny{{"r1"}, {"a"}, Matrix::from_rows({{1}})};
  CHECK_THROWS_AS(normalize_features(tiny), DataError);
}

TEST_CASE("k-means trivial fits") {
  const Matrix two = Matrix::from_rows({{0}, {10}});
  const auto m = kmeans_fit(two, 2, 1);
  std::vector<double> c{m.centroids(0, 0), m.centroids(1, 0)};
  std::sort(c.begin(), c.end());
  CHECK(c == std::vector<double>{0, 10});
  CHECK(m.inertia == 0.0);

  const Matrix x = Matrix::from_rows({{1, 2}, {3, 4}, {5, 9}});
  const auto one = kmeans_fit(x, 1, 1);
  CHECK(one.centroids(0, 0) == doctest::Approx(3.0));
  CHECK(one.centroids(0, 1) == doctest::Approx(5.0));

  CHECK_THROWS_AS(kmeans_fit(Matrix::from_rows({{1}, {1}, {2}}), 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(kmeans_fit(x, 0, 1), std::invalid_argument);
}

TEST_CASE("12 points in three blobs match the exhaustive SSE-optimal partition") {
  std::vector<std::size_t> truth;
  const Matrix x = blobs(4, {{0, 0}, {8, 0}, {0, 8}}, 0.7, 12, &truth);
  const auto m = kmeans_fit(x, 3, 2024);

  // exhaustive search over all 3^12 labelings
  std::vector<std::size_t> labels(12, 0);
  std::vector<std::size_t> best_labels;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < 531441; ++code) {
    std::size_t c = code;
    for (auto& l : labels) {
      l = c % 3;
      c /= 3;
    }
    const double s = partition_sse(x, labels, 3);
    if (s < best) {
      best = s;
      best_labels = labels;
    }
  }
  CHECK(partition(m.labels) == partition(best_labels));
  CHECK(partition(m.labels) == partition(truth));
  CHECK(m.inertia == doctest::Approx(best));
}

TEST_CASE("fitted model invariants") {
  const Matrix x = blobs(30, {{0, 0, 0}, {3, 3, 0}, {0, 3, 3}}, 1.2, 77);
  const auto m = kmeans_fit(x, 3, 5);
  const auto sizes = m.cluster_sizes();
  for (auto s : sizes) {
    CHECK(s > 0);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < 3; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        mean += m.labels[i] == c ? x(i, j) : 0.0;
      }
      mean /= static_cast<double>(sizes[c]);
      CHECK(m.centroids(c, j) == doctest::Approx(mean).epsilon(1e-6));
    }
  }
  for (std::size_t t = 1; t < m.inertia_trace.size(); ++t) {
    CHECK(m.inertia_trace[t] <= m.inertia_trace[t - 1] * (1 + 1e-12));
  }
  CHECK(m.inertia == doctest::Approx(partition_sse(x, m.labels, 3)));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    CHECK(assign_label(m, x.row(i)) == m.labels[i]);
  }
}

TEST_CASE("k-means is deterministic for a fixed seed") {
  const Matrix x = blobs(20, {{0, 0}, {2, 2}}, 1.5, 3);
  const auto a = kmeans_fit(x, 2, 17);
  const auto b = kmeans_fit(x, 2, 17);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids.data() == b.centroids.data());
}

TEST_CASE("normalize then fit is invariant to positive column scaling") {
  const Matrix x = blobs(25, {{0, 0}, {4, 1}, {1, 4}}, 1.0, 31);
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    y(i, 0) *= 1000.0;
    y(i, 1) *= 0.01;
  }
  std::vector<std::string> rows(x.rows(), "r");
  const auto fx = normalize_features({rows, {"a", "b"}, x});
  const auto fy = normalize_features({rows, {"a", "b"}, y});
  const auto mx = kmeans_fit(fx, 3, 9);
  const auto my = kmeans_fit(fy, 3, 9);
  CHECK(partition(mx.labels) == partition(my.labels));
}

TEST_CASE("assign_label tie-breaks to the lowest index") {
  ClusterModel m;
  m.k = 2;
  m.centroids = Matrix::from_rows({{0, 0}, {2, 0}});
  const std::vector<double> mid{1, 0};
  CHECK(assign_label(m, mid) == 0);
  const std::vector<double> c1{2, 0};
  CHECK(assign_label(m, c1) == 1);
  const std::vector<double> bad{1};
  CHECK_THROWS_AS(assign_label(m, bad), std::invalid_argument);
}

TEST_CASE("centroid matching finds the minimal-cost permutation") {
  const Matrix ref = Matrix::from_rows({{0, 0}, {5, 5}, {10, 0}});
  const Matrix cand = Matrix::from_rows({{10.1, 0}, {0.2, 0}, {5, 4.9}});
  CHECK(match_centroids(ref, cand) == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("bootstrap on separated blobs is perfectly stable") {
  const Matrix x = blobs(15, {{0, 0}, {20, 0}, {0, 20}}, 0.5, 4);
  const auto r = bootstrap_stability(x, 3, 20, 8);
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.used + r.dropped == 20);
  for (const auto& c : r.centroid_ci) {
    for (const auto& iv : c) {
      CHECK(iv.lo <= iv.hi);
    }
  }
  const auto again = bootstrap_stability(x, 3, 2, 8);
  const auto again2 = bootstrap_stability(x, 3, 2, 8);
  CHECK(again.replicate_accuracy == again2.replicate_accuracy);
  CHECK_THROWS_AS(bootstrap_stability(x, 3, 1, 8), std::invalid_argument);
}

TEST_CASE("bootstrap on overlapping blobs is imperfect") {
  const Matrix x = blobs(60, {{0}, {1}}, 1.0, 6);
  const auto r = bootstrap_stability(x, 2, 30, 10);
  CHECK(r.accuracy < 1.0);
  CHECK(r.accuracy >= 0.0);
}

TEST_CASE("bootstrap accuracy is invariant to relabeling the data order") {
  const Matrix x = blobs(20, {{0, 0}, {6, 0}}, 1.0, 12);
  const auto r = bootstrap_stability(x, 2, 10, 3);
  CHECK(r.accuracy > 0.9);
}

TEST_CASE("gap rule on a synthetic curve") {
  std::vector<GapPoint> pts{{1, 0, 0, 0.1, 0.05}, {2, 0, 0, 0.5, 0.05}, {3, 0, 0, 0.52, 0.05}, {4, 0, 0, 0.6, 0.01}};
  CHECK(choose_k(pts) == 2);
  std::vector<GapPoint> rising{{1, 0, 0, 0.1, 0.01}, {2, 0, 0, 0.3, 0.01}};
  CHECK(choose_k(rising) == 2);
}

TEST_CASE("gap statistic recovers blob counts by majority over seeds") {
  int single_ok = 0;
  int three_ok = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix one = testing::planted_mixture(1, 2, 50, 6.0, 100 + s);
    const auto g1 = gap_statistic(one, 4, 5, s, {3, 100, 1e-6});
    single_ok += g1.chosen_k == 1;
    const Matrix three = testing::planted_mixture(3, 2, 50, 6.0, 200 + s);
    const auto g3 = gap_statistic(three, 5, 5, s, {3, 100, 1e-6});
    three_ok += g3.chosen_k == 3;
    CHECK(g3.chosen_k == choose_k(g3.points));
    CHECK(g3.reference == "uniform-bounding-box");
  }
  CHECK(single_ok > 10);
  CHECK(three_ok > 10);
}

TEST_CASE("gap statistic argument checks") {
  const Matrix x = Matrix::from_rows({{0}, {1}, {2}});
  CHECK_THROWS_AS(gap_statistic(x, 4, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(gap_statistic(x, 2, 1, 1), std::invalid_argument);
}

TEST_CASE("model export round trip reproduces labels bit for bit") {
  const Matrix x = blobs(10, {{0, 0}, {3, 1}}, 0.8, 2);
  std::vector<std::string> rows(x.rows(), "r");
  const auto f = normalize_features({rows, {"a", "b"}, x});
  const auto m = kmeans_fit(f, 2, 42);
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  CHECK(back.centroids.data() == m.centroids.data());
  CHECK(back.scales == m.scales);
  CHECK(back.labels == m.labels);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-3, 5);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> p{u(rng), u(rng)};
    REQUIRE(assign_label(back, p) == assign_label(m, p));
  }
}
