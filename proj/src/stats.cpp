#include "pbf/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace pbf {

namespace {

std::size_t index_of(const std::vector<std::string>& cats, const std::string& v, const char* axis) {
  auto it = std::find(cats.begin(), cats.end(), v);
  if (it == cats.end()) {
    throw DataError(std::string("unknown ") + axis + " category '" + v + "'");
  }
  return static_cast<std::size_t>(it - cats.begin());
}

// Midrank score of each category given its total weight.
std::vector<double> midranks(const std::vector<double>& totals) {
  std::vector<double> r(totals.size());
  double before = 0.0;
  for (std::size_t i = 0; i < totals.size(); ++i) {
    r[i] = before + (totals[i] + 1.0) / 2.0;
    before += totals[i];
  }
  return r;
}

double t_test_p(double rho, double n) {
  if (n <= 2.0) {
    return 1.0;
  }
  if (std::abs(rho) >= 1.0) {
    return 0.0;
  }
  const double df = n - 2.0;
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

}  // namespace

double CrossTab::n() const {
  double s = 0.0;
  for (const auto& r : counts) {
    s = std::accumulate(r.begin(), r.end(), s);
  }
  return s;
}

double CrossTab::row_total(std::size_t i) const { return std::accumulate(counts[i].begin(), counts[i].end(), 0.0); }

double CrossTab::col_total(std::size_t j) const {
  double s = 0.0;
  for (const auto& r : counts) {
    s += r[j];
  }
  return s;
}

std::vector<double> CrossTab::col_totals() const {
  std::vector<double> t(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    t[j] = col_total(j);
  }
  return t;
}

CrossTab CrossTab::reversed_rows() const {
  CrossTab t = *this;
  std::reverse(t.rows.begin(), t.rows.end());
  std::reverse(t.counts.begin(), t.counts.end());
  return t;
}

CrossTab CrossTab::reversed_cols() const {
  CrossTab t = *this;
  std::reverse(t.cols.begin(), t.cols.end());
  for (auto& r : t.counts) {
    std::reverse(r.begin(), r.end());
  }
  return t;
}

CrossTab CrossTab::select_columns(const std::vector<std::string>& names) const {
  CrossTab t{rows, names, std::vector<std::vector<double>>(rows.size())};
  for (const auto& name : names) {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) {
      throw DataError("cross-tab has no column '" + name + "'");
    }
    const auto j = static_cast<std::size_t>(it - cols.begin());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t.counts[i].push_back(counts[i][j]);
    }
  }
  return t;
}

Table CrossTab::to_table(std::string name) const {
  Table t;
  t.name = std::move(name);
  t.header = {""};
  t.header.insert(t.header.end(), cols.begin(), cols.end());
  t.header.push_back("total");
  auto fmt = [](double v) { return v == std::floor(v) ? std::to_string(static_cast<long long>(v)) : format_fixed(v, 4); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> row{rows[i]};
    for (double v : counts[i]) {
      row.push_back(fmt(v));
    }
    row.push_back(fmt(row_total(i)));
    t.add_row(std::move(row));
  }
  std::vector<std::string> total{"total"};
  for (std::size_t j = 0; j < cols.size(); ++j) {
    total.push_back(fmt(col_total(j)));
  }
  total.push_back(fmt(n()));
  t.add_row(std::move(total));
  return t;
}

CrossTab crosstab(std::span<const std::pair<std::string, std::string>> pairs, std::vector<std::string> row_categories,
                  std::vector<std::string> col_categories) {
  if (pairs.empty()) {
    throw DataError("no answer pairs to cross-tabulate");
  }
  CrossTab t;
  t.rows = std::move(row_categories);
  t.cols = std::move(col_categories);
  t.counts.assign(t.rows.size(), std::vector<double>(t.cols.size(), 0.0));
  for (const auto& [r, c] : pairs) {
    t.counts[index_of(t.rows, r, "row")][index_of(t.cols, c, "column")] += 1.0;
  }
  return t;
}

CrossTab crosstab_from_counts(std::vector<std::string> rows, std::vector<std::string> cols,
                              std::vector<std::vector<double>> counts) {
  if (counts.size() != rows.size()) {
    throw std::invalid_argument("count rows do not match row categories");
  }
  for (const auto& r : counts) {
    if (r.size() != cols.size()) {
      throw std::invalid_argument("count columns do not match column categories");
    }
    for (double v : r) {
      if (!(v >= 0.0)) {
        throw std::invalid_argument("counts must be non-negative");
      }
    }
  }
  return CrossTab{std::move(rows), std::move(cols), std::move(counts)};
}

CrossTab crosstab_from_table(const Table& table) {
  if (table.header.size() < 2 || table.rows.empty()) {
    throw DataError("cross-tabulation table '" + table.name + "' needs a label column and counts");
  }
  std::vector<std::string> rows;
  std::vector<std::vector<double>> counts;
  for (const auto& r : table.rows) {
    rows.push_back(r[0]);
    std::vector<double> c;
    for (std::size_t j = 1; j < r.size(); ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(r[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != r[j].size() || r[j].empty() || !(v >= 0.0)) {
        throw DataError("bad count '" + r[j] + "' in row '" + r[0] + "' of '" + table.name + "'");
      }
      c.push_back(v);
    }
    counts.push_back(std::move(c));
  }
  return crosstab_from_counts(std::move(rows), {table.header.begin() + 1, table.header.end()}, std::move(counts));
}

CrossTab load_crosstab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  return crosstab_from_table(read_csv_table(in, path.stem().string()));
}

double chi_square_sf(double statistic, std::size_t df) {
  if (df == 0) {
    return 1.0;
  }
  if (statistic <= 0.0) {
    return 1.0;
  }
  const boost::math::chi_squared dist(static_cast<double>(df));
  return std::clamp(boost::math::cdf(boost::math::complement(dist, statistic)), 0.0, 1.0);
}

ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> reference) {
  if (observed.size() != reference.size()) {
    throw std::invalid_argument("observed and reference differ in length");
  }
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  const double ref_total = std::accumulate(reference.begin(), reference.end(), 0.0);
  if (!(total > 0.0) || !(ref_total > 0.0)) {
    throw DataError("goodness of fit needs positive totals");
  }
  ChiSquareResult r;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] < 0.0 || reference[i] < 0.0) {
      throw DataError("negative count or proportion");
    }
    const double expected = reference[i] / ref_total * total;
    if (expected == 0.0) {
      if (observed[i] > 0.0) {
        throw DataError("observed count in a category with zero expected count");
      }
      continue;
    }
    ++cells;
    r.statistic += (observed[i] - expected) * (observed[i] - expected) / expected;
  }
  r.df = cells > 0 ? cells - 1 : 0;
  r.p = chi_square_sf(r.statistic, r.df);
  return r;
}

std::vector<ChiSquareResult> per_row_gof(const CrossTab& table) {
  const auto pooled = table.col_totals();
  std::vector<ChiSquareResult> out;
  for (const auto& row : table.counts) {
    out.push_back(chi_square_gof(row, pooled));
  }
  return out;
}

ChiSquareResult chi_square_independence(const CrossTab& table) {
  const double n = table.n();
  if (!(n > 0.0)) {
    throw DataError("empty cross-tabulation");
  }
  const auto ct = table.col_totals();
  std::size_t live_rows = 0;
  std::size_t live_cols = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    live_rows += table.row_total(i) > 0.0;
  }
  for (double c : ct) {
    live_cols += c > 0.0;
  }
  ChiSquareResult r;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double rt = table.row_total(i);
    for (std::size_t j = 0; j < table.cols.size(); ++j) {
      const double e = rt * ct[j] / n;
      if (e > 0.0) {
        r.statistic += (table.counts[i][j] - e) * (table.counts[i][j] - e) / e;
      }
    }
  }
  r.df = live_rows > 0 && live_cols > 0 ? (live_rows - 1) * (live_cols - 1) : 0;
  r.p = chi_square_sf(r.statistic, r.df);
  return r;
}

Table gof_table(const CrossTab& table, const std::vector<ChiSquareResult>& results) {
  Table t;
  t.name = "chi_square";
  t.header = {"row", "statistic", "df", "p"};
  for (std::size_t i = 0; i < results.size(); ++i) {
    t.add_row({i < table.rows.size() ? table.rows[i] : std::to_string(i), format_fixed(results[i].statistic, 4),
               std::to_string(results[i].df), format_fixed(results[i].p, 6)});
  }
  return t;
}

SpearmanResult spearman_rho(const CrossTab& table) {
  const double n = table.n();
  std::vector<double> rt(table.rows.size());
  for (std::size_t i = 0; i < rt.size(); ++i) {
    rt[i] = table.row_total(i);
  }
  const auto ct = table.col_totals();
  const auto rr = midranks(rt);
  const auto cr = midranks(ct);
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rt.size(); ++i) {
    sxx += rt[i] * (rr[i] - mean) * (rr[i] - mean);
  }
  for (std::size_t j = 0; j < ct.size(); ++j) {
    syy += ct[j] * (cr[j] - mean) * (cr[j] - mean);
  }
  for (std::size_t i = 0; i < rt.size(); ++i) {
    for (std::size_t j = 0; j < ct.size(); ++j) {
      sxy += table.counts[i][j] * (rr[i] - mean) * (cr[j] - mean);
    }
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw DataError("Spearman correlation is undefined for a constant axis");
  }
  SpearmanResult r;
  r.n = n;
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  r.p = t_test_p(r.rho, n);
  return r;
}

SpearmanResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("Spearman needs two equal-length samples of size >= 2");
  }
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j < idx.size() && v[idx[j]] == v[idx[i]]) {
        ++j;
      }
      const double mid = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
      for (std::size_t k = i; k < j; ++k) {
        r[idx[k]] = mid;
      }
      i = j;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw DataError("Spearman correlation is undefined for a constant sample");
  }
  SpearmanResult r;
  r.n = n;
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  r.p = t_test_p(r.rho, n);
  return r;
}

double WeightScheme::weight_for(const std::string& category) const {
  auto it = category_weight.find(category);
  return it == category_weight.end() ? 0.0 : it->second;
}

Table WeightScheme::to_table() const {
  Table t;
  t.name = "weights";
  t.header = {"axis", "category", "weight"};
  for (const auto& [cat, w] : category_weight) {
    t.add_row({axis, cat, format_fixed(w, 6)});
  }
  return t;
}

WeightScheme poststratification_weights(std::span<const std::string> categories, const std::string& axis,
                                        const std::map<std::string, double>& target) {
  double target_total = 0.0;
  for (const auto& [cat, share] : target) {
    if (!(share >= 0.0)) {
      throw std::invalid_argument("target shares must be non-negative");
    }
    target_total += share;
  }
  if (!(target_total > 0.0)) {
    throw std::invalid_argument("target marginal is empty");
  }
  std::map<std::string, std::size_t> counts;
  std::size_t included = 0;
  for (const auto& c : categories) {
    if (target.count(c)) {
      ++counts[c];
      ++included;
    }
  }
  WeightScheme s;
  s.axis = axis;
  s.id = "poststrat:" + axis;
  for (const auto& [cat, share] : target) {
    const auto it = counts.find(cat);
    if (it == counts.end()) {
      if (share > 0.0) {
        throw DataError("no answered respondents in category '" + cat + "' on axis '" + axis + "'");
      }
      continue;
    }
    const double sample_share = static_cast<double>(it->second) / static_cast<double>(included);
    s.category_weight[cat] = (share / target_total) / sample_share;
  }
  s.respondent_weights.reserve(categories.size());
  for (const auto& c : categories) {
    const double w = s.weight_for(c);
    s.respondent_weights.push_back(w);
    s.excluded += target.count(c) ? 0 : 1;
  }
  return s;
}

WeightScheme poststratification_weights(std::span<const ResponseRecord> records, const std::string& axis,
                                        const std::map<std::string, double>& target) {
  std::vector<std::string> cats;
  cats.reserve(records.size());
  for (const auto& r : records) {
    cats.emplace_back(r.demographic(axis));
  }
  return poststratification_weights(cats, axis, target);
}

Distribution weighted_tally(std::span<const ResponseRecord> records, const WeightScheme& scheme,
                            const Question& question) {
  if (scheme.respondent_weights.size() != records.size()) {
    throw std::invalid_argument("weight scheme does not cover the responses");
  }
  return tally_question(records, question, scheme.respondent_weights);
}

}  // namespace pbf
