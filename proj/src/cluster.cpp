#include "pbf/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pbf {

using nlohmann::json;

namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto rng = derived_rng(seed, stream, index);
  return rng();
}

constexpr std::uint64_t kRestartStream = 1;
constexpr std::uint64_t kBootstrapResample = 2;
constexpr std::uint64_t kBootstrapFit = 3;
constexpr std::uint64_t kGapData = 4;
constexpr std::uint64_t kGapReference = 5;
constexpr std::uint64_t kGapReferenceFit = 6;

double sse(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    total += squared_distance(x.row(i), centroids.row(labels[i]));
  }
  return total;
}

std::vector<std::size_t> assign_all(const Matrix& x, const Matrix& centroids) {
  std::vector<std::size_t> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    labels[i] = nearest_centroid(centroids, x.row(i));
  }
  return labels;
}

Matrix plus_plus_seed(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = x.rows();
  Matrix c(k, x.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  std::copy(x.row(first).begin(), x.row(first).end(), c.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = squared_distance(x.row(i), c.row(0));
  }
  for (std::size_t j = 1; j < k; ++j) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = n - 1;
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) {
          continue;
        }
        chosen = i;
        if (target < d2[i]) {
          break;
        }
        target -= d2[i];
      }
    } else {
      chosen = pick(rng);
    }
    std::copy(x.row(chosen).begin(), x.row(chosen).end(), c.row(j).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), c.row(j)));
    }
  }
  return c;
}

// Means of members; an empty cluster takes the point farthest from its own
// centroid among clusters that can spare one. Labels are updated in place.
Matrix update_centroids(const Matrix& x, std::vector<std::size_t>& labels, const Matrix& old, std::size_t k) {
  const std::size_t d = x.cols();
  for (;;) {
    std::vector<std::size_t> count(k, 0);
    for (auto l : labels) {
      ++count[l];
    }
    auto empty = std::find(count.begin(), count.end(), std::size_t{0});
    if (empty == count.end()) {
      break;
    }
    std::size_t far = x.rows();
    double far_d = -1.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (count[labels[i]] < 2) {
        continue;
      }
      const double dd = squared_distance(x.row(i), old.row(labels[i]));
      if (dd > far_d) {
        far_d = dd;
        far = i;
      }
    }
    if (far == x.rows()) {
      throw std::logic_error("cannot repair an empty cluster");
    }
    labels[far] = static_cast<std::size_t>(empty - count.begin());
  }
  Matrix c(k, d, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    ++count[labels[i]];
    auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      c(labels[i], j) += row[j];
    }
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t j = 0; j < d; ++j) {
      c(a, j) /= static_cast<double>(count[a]);
    }
  }
  return c;
}

struct LloydResult {
  Matrix centroids;
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  std::vector<double> trace;
  std::size_t iterations = 0;
};

LloydResult lloyd(const Matrix& x, Matrix centroids, const KMeansOptions& opt) {
  const std::size_t k = centroids.rows();
  LloydResult r;
  r.labels = assign_all(x, centroids);
  r.trace.push_back(sse(x, centroids, r.labels));
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    Matrix next = update_centroids(x, r.labels, centroids, k);
    double shift = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      shift = std::max(shift, std::sqrt(squared_distance(next.row(a), centroids.row(a))));
    }
    centroids = std::move(next);
    auto labels = assign_all(x, centroids);
    r.trace.push_back(sse(x, centroids, labels));
    const bool changed = labels != r.labels;
    r.labels = std::move(labels);
    r.iterations = it + 1;
    if (!changed || shift < opt.tolerance) {
      break;
    }
  }
  r.centroids = update_centroids(x, r.labels, centroids, k);
  r.inertia = sse(x, r.centroids, r.labels);
  if (r.inertia < r.trace.back()) {
    r.trace.push_back(r.inertia);
  }
  return r;
}

double percentile7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) {
    return {};
  }
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw std::invalid_argument("ragged rows");
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

FeatureMatrix normalize_features(const RawMatrix& raw) {
  const Matrix& v = raw.values;
  if (v.rows() < 2) {
    throw DataError("normalization needs at least two rows");
  }
  if (raw.col_ids.size() != v.cols()) {
    throw std::invalid_argument("column id count does not match the matrix");
  }
  FeatureMatrix out;
  out.row_ids = raw.row_ids;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < v.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
      mean += v(i, j);
    }
    mean /= static_cast<double>(v.rows());
    double ss = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
      ss += (v(i, j) - mean) * (v(i, j) - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(v.rows() - 1));
    if (sd > 0.0) {
      keep.push_back(j);
      out.col_ids.push_back(raw.col_ids[j]);
      out.scales.push_back(sd);
    } else {
      out.dropped_columns.push_back(raw.col_ids[j]);
    }
  }
  if (keep.empty()) {
    throw DataError("every feature column is constant");
  }
  out.values = Matrix(v.rows(), keep.size());
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t c = 0; c < keep.size(); ++c) {
      out.values(i, c) = v(i, keep[c]) / out.scales[c];
    }
  }
  return out;
}

FeatureMatrix identity_features(const RawMatrix& raw) {
  FeatureMatrix out;
  out.row_ids = raw.row_ids;
  out.col_ids = raw.col_ids;
  out.values = raw.values;
  out.scales.assign(raw.values.cols(), 1.0);
  return out;
}

std::size_t distinct_rows(const Matrix& x) {
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(x.row(a).begin(), x.row(a).end(), x.row(b).begin(), x.row(b).end());
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t n = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (less(idx[i - 1], idx[i])) {
      ++n;
    }
  }
  return n;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> point) {
  if (point.size() != centroids.cols()) {
    throw std::invalid_argument("feature dimension " + std::to_string(point.size()) + " does not match model dimension " +
                                std::to_string(centroids.cols()));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centroids.rows(); ++a) {
    const double d = squared_distance(point, centroids.row(a));
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

std::size_t assign_label(const ClusterModel& model, std::span<const double> features) {
  return nearest_centroid(model.centroids, features);
}

Matrix ClusterModel::denormalized_centroids() const {
  Matrix out = centroids;
  for (std::size_t a = 0; a < out.rows(); ++a) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(a, j) *= scales.empty() ? 1.0 : scales[j];
    }
  }
  return out;
}

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (auto l : labels) {
    ++sizes[l];
  }
  return sizes;
}

ClusterModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  if (k == 0) {
    throw std::invalid_argument("k must be at least 1");
  }
  if (x.rows() == 0 || x.cols() == 0) {
    throw DataError("cannot cluster an empty matrix");
  }
  const std::size_t distinct = distinct_rows(x);
  if (k > distinct) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                                " distinct rows");
  }
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  LloydResult best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    auto rng = derived_rng(seed, kRestartStream, r);
    auto fit = lloyd(x, plus_plus_seed(x, k, rng), options);
    if (!have || fit.inertia < best.inertia) {
      best = std::move(fit);
      have = true;
    }
  }
  ClusterModel m;
  m.k = k;
  m.centroids = std::move(best.centroids);
  m.labels = std::move(best.labels);
  m.seed = seed;
  m.inertia = best.inertia;
  m.inertia_trace = std::move(best.trace);
  m.iterations = best.iterations;
  return m;
}

ClusterModel kmeans_fit(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& options) {
  ClusterModel m = kmeans_fit(features.values, k, seed, options);
  m.columns = features.col_ids;
  m.scales = features.scales;
  m.dropped_columns = features.dropped_columns;
  return m;
}

std::vector<std::size_t> match_centroids(const Matrix& reference, const Matrix& candidate) {
  const std::size_t k = reference.rows();
  if (candidate.rows() != k || candidate.cols() != reference.cols()) {
    throw std::invalid_argument("centroid sets differ in shape");
  }
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      cost[i][j] = squared_distance(reference.row(i), candidate.row(j));
    }
  }
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (k <= 6) {
    std::vector<std::size_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        c += cost[i][perm[i]];
      }
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> ref_used(k, false);
  std::vector<bool> cand_used(k, false);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t bi = 0;
    std::size_t bj = 0;
    double bc = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (!ref_used[i] && !cand_used[j] && cost[i][j] < bc) {
          bc = cost[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    ref_used[bi] = cand_used[bj] = true;
    perm[bi] = bj;
  }
  return perm;
}

BootstrapReport bootstrap_stability(const Matrix& x, std::size_t k, std::size_t B, std::uint64_t seed,
                                    const KMeansOptions& options) {
  if (B < 2) {
    throw std::invalid_argument("bootstrap needs at least two resamples");
  }
  const ClusterModel ref = kmeans_fit(x, k, seed, options);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  BootstrapReport rep;
  rep.B = B;
  std::vector<std::vector<std::vector<double>>> samples(k, std::vector<std::vector<double>>(d));
  for (std::size_t b = 0; b < B; ++b) {
    auto rng = derived_rng(seed, kBootstrapResample, b);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    Matrix resample(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = x.row(pick(rng));
      std::copy(src.begin(), src.end(), resample.row(i).begin());
    }
    if (distinct_rows(resample) < k) {
      ++rep.dropped;
      continue;
    }
    const ClusterModel fit = kmeans_fit(resample, k, derived_seed(seed, kBootstrapFit, b), options);
    const auto perm = match_centroids(ref.centroids, fit.centroids);
    Matrix aligned(k, d);
    for (std::size_t j = 0; j < k; ++j) {
      const auto src = fit.centroids.row(perm[j]);
      std::copy(src.begin(), src.end(), aligned.row(j).begin());
    }
    std::vector<std::size_t> count(k, 0);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t l = nearest_centroid(aligned, x.row(i));
      ++count[l];
      agree += l == ref.labels[i] ? 1 : 0;
    }
    if (std::find(count.begin(), count.end(), std::size_t{0}) != count.end()) {
      ++rep.dropped;
      continue;
    }
    rep.replicate_accuracy.push_back(static_cast<double>(agree) / static_cast<double>(n));
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t f = 0; f < d; ++f) {
        samples[j][f].push_back(aligned(j, f));
      }
    }
  }
  rep.used = rep.replicate_accuracy.size();
  if (rep.used == 0) {
    throw DataError("every bootstrap replicate was degenerate");
  }
  rep.accuracy = std::accumulate(rep.replicate_accuracy.begin(), rep.replicate_accuracy.end(), 0.0) /
                 static_cast<double>(rep.used);
  rep.centroid_ci.assign(k, std::vector<Interval>(d));
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t f = 0; f < d; ++f) {
      rep.centroid_ci[j][f] = Interval{percentile7(samples[j][f], 0.025), percentile7(samples[j][f], 0.975)};
    }
  }
  return rep;
}

Table BootstrapReport::to_table(const std::vector<std::string>& columns) const {
  Table t;
  t.name = "bootstrap";
  t.header = {"cluster", "feature", "lo", "hi"};
  for (std::size_t j = 0; j < centroid_ci.size(); ++j) {
    for (std::size_t f = 0; f < centroid_ci[j].size(); ++f) {
      t.add_row({std::to_string(j), f < columns.size() ? columns[f] : std::to_string(f),
                 format_fixed(centroid_ci[j][f].lo, 6), format_fixed(centroid_ci[j][f].hi, 6)});
    }
  }
  return t;
}

std::size_t choose_k(const std::vector<GapPoint>& points) {
  if (points.empty()) {
    throw std::invalid_argument("empty gap curve");
  }
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i].gap >= points[i + 1].gap - points[i + 1].s) {
      return points[i].k;
    }
  }
  return points.back().k;
}

GapCurve gap_statistic(const Matrix& x, std::size_t k_max, std::size_t b_ref, std::uint64_t seed,
                       const KMeansOptions& options) {
  if (k_max < 1) {
    throw std::invalid_argument("k_max must be at least 1");
  }
  if (b_ref < 2) {
    throw std::invalid_argument("gap statistic needs at least two reference sets");
  }
  if (x.rows() < k_max || distinct_rows(x) < k_max) {
    throw std::invalid_argument("k_max = " + std::to_string(k_max) + " exceeds the number of distinct rows");
  }
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  auto safe_log = [](double w) { return std::log(std::max(w, std::numeric_limits<double>::min())); };

  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], x(i, j));
      hi[j] = std::max(hi[j], x(i, j));
    }
  }
  std::vector<std::vector<double>> ref_log(k_max);
  for (std::size_t b = 0; b < b_ref; ++b) {
    auto rng = derived_rng(seed, kGapReference, b);
    Matrix r(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        r(i, j) = lo[j] + (hi[j] - lo[j]) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      }
    }
    for (std::size_t k = 1; k <= k_max; ++k) {
      const auto fit = kmeans_fit(r, k, derived_seed(seed, kGapReferenceFit, b * 1000 + k), options);
      ref_log[k - 1].push_back(safe_log(fit.inertia));
    }
  }
  GapCurve curve;
  const double bb = static_cast<double>(b_ref);
  for (std::size_t k = 1; k <= k_max; ++k) {
    GapPoint p;
    p.k = k;
    p.log_w = safe_log(kmeans_fit(x, k, derived_seed(seed, kGapData, k), options).inertia);
    const auto& v = ref_log[k - 1];
    p.ref_log_w = std::accumulate(v.begin(), v.end(), 0.0) / bb;
    double ss = 0.0;
    for (double l : v) {
      ss += (l - p.ref_log_w) * (l - p.ref_log_w);
    }
    p.s = std::sqrt(ss / bb) * std::sqrt(1.0 + 1.0 / bb);
    p.gap = p.ref_log_w - p.log_w;
    curve.points.push_back(p);
  }
  curve.chosen_k = choose_k(curve.points);
  return curve;
}

Table GapCurve::to_table() const {
  Table t;
  t.name = "gap_curve";
  t.header = {"k", "log_w", "ref_log_w", "gap", "s", "chosen", "reference"};
  for (const auto& p : points) {
    t.add_row({std::to_string(p.k), format_fixed(p.log_w, 6), format_fixed(p.ref_log_w, 6), format_fixed(p.gap, 6),
               format_fixed(p.s, 6), p.k == chosen_k ? "1" : "0", reference});
  }
  return t;
}

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

}  // namespace

json model_to_json(const ClusterModel& m) {
  return json{{"k", m.k},
              {"seed", m.seed},
              {"inertia", m.inertia},
              {"iterations", m.iterations},
              {"columns", m.columns},
              {"scales", m.scales},
              {"dropped_columns", m.dropped_columns},
              {"centroids", matrix_json(m.centroids)},
              {"centroids_denormalized", matrix_json(m.denormalized_centroids())},
              {"labels", m.labels}};
}

ClusterModel model_from_json(const json& doc) {
  ClusterModel m;
  m.k = doc.at("k").get<std::size_t>();
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.inertia = doc.value("inertia", 0.0);
  m.iterations = doc.value("iterations", std::size_t{0});
  m.columns = doc.value("columns", std::vector<std::string>{});
  m.scales = doc.value("scales", std::vector<double>{});
  m.dropped_columns = doc.value("dropped_columns", std::vector<std::string>{});
  m.centroids = Matrix::from_rows(doc.at("centroids").get<std::vector<std::vector<double>>>());
  m.labels = doc.value("labels", std::vector<std::size_t>{});
  if (m.centroids.rows() != m.k) {
    throw DataError("model centroid count does not match k");
  }
  if (!m.scales.empty() && m.scales.size() != m.centroids.cols()) {
    throw DataError("model scales do not match centroid dimension");
  }
  for (auto l : m.labels) {
    if (l >= m.k) {
      throw DataError("model label out of range");
    }
  }
  return m;
}

void save_model(const ClusterModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write model '" + path.string() + "'");
  }
  out << model_to_json(model).dump(2) << '\n';
}

ClusterModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open model '" + path.string() + "'");
  }
  try {
    return model_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError("malformed model '" + path.string() + "': " + e.what());
  }
}

Table labels_table(const ClusterModel& model, const std::vector<std::string>& row_ids) {
  Table t;
  t.name = "labels";
  t.header = {"row_id", "cluster"};
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    t.add_row({i < row_ids.size() ? row_ids[i] : std::to_string(i), std::to_string(model.labels[i])});
  }
  return t;
}

Table centroids_table(const ClusterModel& model) {
  Table t;
  t.name = "centroids";
  t.header = {"cluster", "size"};
  const Matrix dn = model.denormalized_centroids();
  for (std::size_t j = 0; j < dn.cols(); ++j) {
    t.header.push_back(j < model.columns.size() ? model.columns[j] : "f" + std::to_string(j));
  }
  const auto sizes = model.cluster_sizes();
  for (std::size_t a = 0; a < model.k; ++a) {
    std::vector<std::string> row{std::to_string(a), std::to_string(sizes[a])};
    for (std::size_t j = 0; j < dn.cols(); ++j) {
      row.push_back(format_fixed(dn(a, j), 6));
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace pbf
