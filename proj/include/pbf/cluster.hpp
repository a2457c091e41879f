#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pbf/table.hpp"

namespace pbf {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct RawMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Matrix values;
};

struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;  // retained columns
  Matrix values;                     // normalized
  std::vector<double> scales;        // per retained column
  std::vector<std::string> dropped_columns;
};

/// Divides each column by its sample standard deviation; constant columns
/// are dropped and listed.
FeatureMatrix normalize_features(const RawMatrix& raw);
/// Same shape as normalize_features with unit scales and nothing dropped.
FeatureMatrix identity_features(const RawMatrix& raw);

std::size_t distinct_rows(const Matrix& x);
double squared_distance(std::span<const double> a, std::span<const double> b);

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift
};

struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;  // normalized space
  std::vector<std::size_t> labels;
  std::uint64_t seed = 0;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // winning restart, one entry per Lloyd step
  std::size_t iterations = 0;
  std::vector<std::string> columns;
  std::vector<double> scales;
  std::vector<std::string> dropped_columns;

  Matrix denormalized_centroids() const;
  std::vector<std::size_t> cluster_sizes() const;
};

ClusterModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});
ClusterModel kmeans_fit(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& options = {});

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
std::size_t assign_label(const ClusterModel& model, std::span<const double> features);
std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> point);

/// Permutation p minimizing sum_j |reference_j - candidate_{p[j]}|^2.
/// Exhaustive up to 6 clusters, greedy beyond.
std::vector<std::size_t> match_centroids(const Matrix& reference, const Matrix& candidate);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapReport {
  double accuracy = 0.0;
  std::vector<std::vector<Interval>> centroid_ci;  // [cluster][feature], normalized space
  std::size_t B = 0;
  std::size_t used = 0;
  std::size_t dropped = 0;
  std::vector<double> replicate_accuracy;

  Table to_table(const std::vector<std::string>& columns) const;
};

BootstrapReport bootstrap_stability(const Matrix& x, std::size_t k, std::size_t B, std::uint64_t seed,
                                    const KMeansOptions& options = {});

struct GapPoint {
  std::size_t k = 0;
  double log_w = 0.0;
  double ref_log_w = 0.0;  // mean over reference sets
  double gap = 0.0;
  double s = 0.0;
};

struct GapCurve {
  std::vector<GapPoint> points;
  std::size_t chosen_k = 0;
  std::string reference = "uniform-bounding-box";

  Table to_table() const;
};

/// Smallest k with gap(k) >= gap(k+1) - s(k+1); the last k if none.
std::size_t choose_k(const std::vector<GapPoint>& points);

GapCurve gap_statistic(const Matrix& x, std::size_t k_max, std::size_t b_ref, std::uint64_t seed,
                       const KMeansOptions& options = {});

nlohmann::json model_to_json(const ClusterModel& model);
ClusterModel model_from_json(const nlohmann::json& doc);
void save_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_model(const std::filesystem::path& path);

/// row_id, cluster
Table labels_table(const ClusterModel& model, const std::vector<std::string>& row_ids);
/// cluster, size, then one column per feature (de-normalized)
Table centroids_table(const ClusterModel& model);

}  // namespace pbf
