#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pbf/table.hpp"
#include "pbf/timeutil.hpp"

namespace pbf {

struct ClusterSeries {
  std::size_t label = 0;
  std::size_t size = 0;                // C_c
  std::vector<std::size_t> counts;     // counts[n-1]: cluster votes among the first n
  std::vector<double> fraction;        // counts / size
};

struct ProgressionSeries {
  std::size_t N = 0;
  std::vector<ClusterSeries> clusters;  // ascending label
  std::vector<std::size_t> order;       // labels in arrival order
};

ProgressionSeries cumulative_cluster_fraction(std::span<const std::size_t> labels);

/// Hypergeometric null bands for the cumulative fraction under uniformly
/// random arrival order.
struct BandSpec {
  std::size_t N = 0;
  std::vector<std::size_t> sizes;
  std::vector<std::vector<double>> sigma;  // [cluster][n], n = 0..N

  double mean(std::size_t n) const { return static_cast<double>(n) / static_cast<double>(N); }
};

BandSpec hypergeometric_bands(std::size_t N, std::span<const std::size_t> sizes);
BandSpec hypergeometric_bands(const ProgressionSeries& series);

struct Excursion {
  std::size_t start = 0;  // positions n, 1-based, inclusive
  std::size_t end = 0;
  int sign = 0;           // +1 above the mean, -1 below
  double peak_z = 0.0;
};

struct ClusterExcursions {
  std::size_t label = 0;
  std::vector<std::vector<Excursion>> by_level;  // aligned with ExcursionReport::z_levels
  std::vector<std::size_t> positions_beyond;     // per level
  double max_z = 0.0;
  double max_z_above = 0.0;
  double max_z_below = 0.0;
};

struct ExcursionReport {
  std::vector<double> z_levels;
  std::vector<ClusterExcursions> clusters;
  double max_z = 0.0;
  std::size_t N = 0;

  /// Share of (cluster, position) cells beyond z_levels[level].
  double fraction_beyond(std::size_t level) const;
  Table to_table() const;
};

ExcursionReport scan_excursions(const ProgressionSeries& series, const BandSpec& bands,
                                std::span<const double> z_levels);

struct DayShares {
  Day day;
  std::size_t n = 0;
  std::vector<double> shares;  // aligned with DailyProportions::labels
};

struct DailyProportions {
  std::vector<std::size_t> labels;
  std::vector<DayShares> days;

  Table to_table() const;
};

DailyProportions daily_cluster_proportions(std::span<const std::pair<Day, std::size_t>> labelled);

struct ShuffleRange {
  std::size_t label = 0;
  double min_max_z = 0.0;
  double max_max_z = 0.0;
};

/// Re-runs the excursion scan with the order inside each day shuffled;
/// reports the spread of each cluster's signed max z (largest above-mean z).
std::vector<ShuffleRange> within_day_shuffle_robustness(std::span<const std::pair<Day, std::size_t>> ordered,
                                                        std::size_t shuffles, std::uint64_t seed);

/// position, mean, then per cluster: frac, lo1, hi1, lo2, hi2
Table progression_table(const ProgressionSeries& series, const BandSpec& bands);

}  // namespace pbf
