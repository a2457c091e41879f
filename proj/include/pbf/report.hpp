#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pbf/progression.hpp"
#include "pbf/table.hpp"

namespace pbf {

struct PlotLine {
  std::string label;
  std::string group;  // lines of one cluster share a group and a colour
  std::vector<double> y;
  double z = 0.0;  // band lines only: signed multiple of sigma
};

/// x values with data curves and reference band lines on the same grid.
struct PlotSeries {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<PlotLine> curves;
  std::vector<PlotLine> bands;

  /// x, then each curve, then each band, one row per x value.
  Table to_table() const;
};

/// Cumulative fraction of each cluster at positions 0..N plus mean +- z sigma
/// band lines for each cluster and z level.
PlotSeries progression_plot(const ProgressionSeries& series, const BandSpec& bands, std::span<const double> z_levels,
                            std::string name = "progression");
/// Per-day cluster proportions; x is the day offset from the first day.
PlotSeries daily_proportion_plot(const DailyProportions& daily, std::string name = "daily_proportions");

/// Standalone SVG document. Long series are thinned to at most `max_points`
/// vertices per line, keeping each bucket's extremes.
std::string render_svg(const PlotSeries& series, std::size_t max_points = 2000);

class ReportBundle {
 public:
  void add_table(Table table);
  void add_series(PlotSeries series);

  const std::map<std::string, Table>& tables() const { return tables_; }
  const std::map<std::string, PlotSeries>& series() const { return series_; }
  /// Throws std::out_of_range naming the missing entry.
  const Table& table(const std::string& name) const;
  const PlotSeries& plot(const std::string& name) const;

  /// <dir>/<table>.csv for each table and <dir>/<series>.svg + .csv for each series.
  void write(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, Table> tables_;
  std::map<std::string, PlotSeries> series_;
};

/// Writes `path` (SVG) and the raw series beside it with a .csv extension.
/// Throws std::out_of_range for an unknown name and std::invalid_argument for
/// an empty series.
void emit_plot_series(const ReportBundle& bundle, const std::string& name, const std::filesystem::path& path);

/// Tables regenerated from the shipped published-table fixtures: fee answer
/// shares, per-cluster goodness of fit for the follow-up scenario and police
/// questions, and the police cross-tab correlation.
ReportBundle fixture_report(const std::filesystem::path& tables_dir);

}  // namespace pbf
