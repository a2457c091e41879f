#include "pbf/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pbf/aggregate.hpp"
#include "pbf/stats.hpp"

namespace pbf {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) { return format_fixed(v, 6); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

// Indices to draw: everything for short lines, otherwise first, last and the
// extremes of each bucket in x order.
std::vector<std::size_t> thin(const std::vector<double>& y, std::size_t max_points) {
  std::vector<std::size_t> idx;
  if (y.size() <= max_points || max_points < 4) {
    idx.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      idx[i] = i;
    }
    return idx;
  }
  const std::size_t buckets = max_points / 2 - 1;
  const std::size_t width = (y.size() + buckets - 1) / buckets;
  idx.push_back(0);
  for (std::size_t b = 0; b * width < y.size(); ++b) {
    const std::size_t lo = b * width;
    const std::size_t hi = std::min(y.size(), lo + width);
    std::size_t mn = lo;
    std::size_t mx = lo;
    for (std::size_t i = lo; i < hi; ++i) {
      if (y[i] < y[mn]) {
        mn = i;
      }
      if (y[i] > y[mx]) {
        mx = i;
      }
    }
    idx.push_back(std::min(mn, mx));
    idx.push_back(std::max(mn, mx));
  }
  idx.push_back(y.size() - 1);
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

std::string colour_for(const std::string& group, const std::vector<std::string>& groups) {
  const auto it = std::find(groups.begin(), groups.end(), group);
  const auto i = static_cast<std::size_t>(it - groups.begin());
  return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

Table read_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open fixture '" + path.string() + "'");
  }
  return read_csv_table(in, path.stem().string());
}

}  // namespace

Table PlotSeries::to_table() const {
  Table t;
  t.name = name;
  t.header.push_back(x_label.empty() ? "x" : x_label);
  for (const auto& c : curves) {
    t.header.push_back(c.label);
  }
  for (const auto& b : bands) {
    t.header.push_back(b.label);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<std::string> row{num(x[i])};
    for (const auto& c : curves) {
      row.push_back(num(c.y.at(i)));
    }
    for (const auto& b : bands) {
      row.push_back(num(b.y.at(i)));
    }
    t.add_row(std::move(row));
  }
  return t;
}

PlotSeries progression_plot(const ProgressionSeries& series, const BandSpec& bands, std::span<const double> z_levels,
                            std::string name) {
  PlotSeries p;
  p.name = std::move(name);
  p.x_label = "position";
  p.y_label = "fraction of cluster votes cast";
  const std::size_t N = series.N;
  for (std::size_t n = 0; n <= N; ++n) {
    p.x.push_back(static_cast<double>(n));
  }
  for (std::size_t c = 0; c < series.clusters.size(); ++c) {
    const auto& cs = series.clusters[c];
    const std::string group = "cluster " + std::to_string(cs.label);
    PlotLine curve{group, group, {0.0}, 0.0};
    curve.y.insert(curve.y.end(), cs.fraction.begin(), cs.fraction.end());
    p.curves.push_back(std::move(curve));
    for (double z : z_levels) {
      for (double signed_z : {-z, z}) {
        PlotLine band;
        band.group = group;
        band.z = signed_z;
        band.label = group + (signed_z < 0 ? " -" : " +") + format_fixed(z, 0) + "sd";
        for (std::size_t n = 0; n <= N; ++n) {
          band.y.push_back(bands.mean(n) + signed_z * bands.sigma[c][n]);
        }
        p.bands.push_back(std::move(band));
      }
    }
  }
  return p;
}

PlotSeries daily_proportion_plot(const DailyProportions& daily, std::string name) {
  PlotSeries p;
  p.name = std::move(name);
  p.x_label = "day";
  p.y_label = "share of responses";
  if (daily.days.empty()) {
    return p;
  }
  const Day first = daily.days.front().day;
  for (const auto& d : daily.days) {
    p.x.push_back(static_cast<double>((d.day - first).count()));
  }
  for (std::size_t c = 0; c < daily.labels.size(); ++c) {
    const std::string group = "cluster " + std::to_string(daily.labels[c]);
    PlotLine line{group, group, {}, 0.0};
    for (const auto& d : daily.days) {
      line.y.push_back(d.shares[c]);
    }
    p.curves.push_back(std::move(line));
  }
  return p;
}

std::string render_svg(const PlotSeries& series, std::size_t max_points) {
  if (series.x.empty() || series.curves.empty()) {
    throw std::invalid_argument("plot series '" + series.name + "' is empty");
  }
  const double W = 800;
  const double H = 500;
  const double left = 70;
  const double right = 170;
  const double top = 30;
  const double bottom = 50;
  double x0 = series.x.front();
  double x1 = series.x.back();
  double y0 = 0.0;
  double y1 = 1.0;
  for (const auto* lines : {&series.curves, &series.bands}) {
    for (const auto& l : *lines) {
      for (double v : l.y) {
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
      }
    }
  }
  if (x1 <= x0) {
    x1 = x0 + 1;
  }
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * (W - left - right); };
  auto sy = [&](double v) { return H - bottom - (v - y0) / (y1 - y0) * (H - top - bottom); };

  std::vector<std::string> groups;
  for (const auto& c : series.curves) {
    if (std::find(groups.begin(), groups.end(), c.group) == groups.end()) {
      groups.push_back(c.group);
    }
  }

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
  out << "<title>" << escape_xml(series.name) << "</title>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
      << "\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom << "\"/>\n";
  out << "</g>\n";
  out << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    out << "<text x=\"" << format_fixed(sx(xv), 1) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">"
        << format_fixed(xv, 0) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << format_fixed(sy(yv) + 4, 1) << "\" text-anchor=\"end\">"
        << format_fixed(yv, 2) << "</text>\n";
  }
  out << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
      << escape_xml(series.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << (top + H - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (top + H - bottom) / 2 << ")\">" << escape_xml(series.y_label) << "</text>\n";
  out << "</g>\n";

  auto polyline = [&](const PlotLine& l, const char* cls) {
    out << "<polyline class=\"" << cls << "\" data-label=\"" << escape_xml(l.label) << "\" fill=\"none\" stroke=\""
        << colour_for(l.group, groups) << '"';
    if (std::string(cls) == "band") {
      out << " stroke-width=\"1\" stroke-dasharray=\"" << (std::abs(l.z) < 1.5 ? "6,4" : "2,3") << '"';
    } else {
      out << " stroke-width=\"1.5\"";
    }
    out << " points=\"";
    bool first = true;
    for (std::size_t i : thin(l.y, max_points)) {
      out << (first ? "" : " ") << format_fixed(sx(series.x[i]), 2) << ',' << format_fixed(sy(l.y[i]), 2);
      first = false;
    }
    out << "\"/>\n";
  };
  for (const auto& b : series.bands) {
    polyline(b, "band");
  }
  for (const auto& c : series.curves) {
    polyline(c, "curve");
  }

  out << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double y = top + 10 + 18.0 * static_cast<double>(g);
    out << "<line x1=\"" << W - right + 12 << "\" y1=\"" << y << "\" x2=\"" << W - right + 32 << "\" y2=\"" << y
        << "\" stroke=\"" << colour_for(groups[g], groups) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - right + 38 << "\" y=\"" << y + 4 << "\">" << escape_xml(groups[g]) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

void ReportBundle::add_table(Table table) {
  const auto name = table.name;
  tables_.insert_or_assign(name, std::move(table));
}

void ReportBundle::add_series(PlotSeries series) {
  const auto name = series.name;
  series_.insert_or_assign(name, std::move(series));
}

const Table& ReportBundle::table(const std::string& name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) {
    throw std::out_of_range("report has no table '" + name + "'");
  }
  return it->second;
}

const PlotSeries& ReportBundle::plot(const std::string& name) const {
  auto it = series_.find(name);
  if (it == series_.end()) {
    throw std::out_of_range("report has no plot series '" + name + "'");
  }
  return it->second;
}

void ReportBundle::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, t] : tables_) {
    std::ofstream out(dir / (name + ".csv"));
    t.write_csv(out);
  }
  for (const auto& [name, s] : series_) {
    emit_plot_series(*this, name, dir / (name + ".svg"));
  }
}

void emit_plot_series(const ReportBundle& bundle, const std::string& name, const std::filesystem::path& path) {
  const auto& s = bundle.plot(name);
  const auto svg = render_svg(s);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream(path) << svg;
  auto csv = path;
  csv.replace_extension(".csv");
  std::ofstream out(csv);
  s.to_table().write_csv(out);
}

ReportBundle fixture_report(const std::filesystem::path& tables_dir) {
  ReportBundle bundle;

  const auto fees = read_fixture(tables_dir / "fees_2020_counts.csv");
  const auto& levels = fee_level_labels();
  Table shares;
  shares.name = "fee_shares_2020";
  shares.header = {"fee_category"};
  shares.header.insert(shares.header.end(), levels.begin(), levels.end());
  shares.header.push_back("n");
  for (const auto& row : fees.rows) {
    std::vector<std::optional<std::size_t>> answers;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      answers.insert(answers.end(), std::stoull(row.at(l + 1)), l);
    }
    const auto d = tally_distribution("fee." + row.at(0), levels, answers);
    std::vector<std::string> out{row.at(0)};
    for (const auto& s : d.shares) {
      out.push_back(format_fixed(s.proportion, 3));
    }
    out.push_back(std::to_string(d.n));
    shares.add_row(std::move(out));
  }
  bundle.add_table(std::move(shares));

  const auto scenarios = crosstab_from_table(read_fixture(tables_dir / "followup_scenario_by_cluster.csv"));
  const auto revenue = scenarios.select_columns({"rev-A", "rev-B", "rev-C"});
  const auto expenditure = scenarios.select_columns({"exp-A", "exp-B", "exp-C"});
  auto rev_gof = gof_table(revenue, per_row_gof(revenue));
  rev_gof.name = "scenario_revenue_gof";
  bundle.add_table(std::move(rev_gof));
  auto exp_gof = gof_table(expenditure, per_row_gof(expenditure));
  exp_gof.name = "scenario_expenditure_gof";
  bundle.add_table(std::move(exp_gof));

  const auto police = crosstab_from_table(read_fixture(tables_dir / "followup_police_by_cluster.csv"));
  auto police_gof = gof_table(police, per_row_gof(police));
  police_gof.name = "police_by_cluster_gof";
  bundle.add_table(std::move(police_gof));

  const auto ideal = crosstab_from_table(read_fixture(tables_dir / "followup_police_crosstab.csv"));
  const auto indep = chi_square_independence(ideal);
  const auto rho = spearman_rho(ideal);
  Table tests;
  tests.name = "police_crosstab_tests";
  tests.header = {"test", "statistic", "df", "p", "n"};
  tests.add_row({"chi_square_independence", format_fixed(indep.statistic, 4), std::to_string(indep.df),
                 format_fixed(indep.p, 6), format_fixed(ideal.n(), 0)});
  tests.add_row({"spearman_rho", format_fixed(rho.rho, 4), format_fixed(rho.n - 2, 0), format_fixed(rho.p, 6),
                 format_fixed(rho.n, 0)});
  bundle.add_table(std::move(tests));
  return bundle;
}

}  // namespace pbf
