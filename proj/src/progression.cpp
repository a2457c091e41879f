#include "pbf/progression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace pbf {

ProgressionSeries cumulative_cluster_fraction(std::span<const std::size_t> labels) {
  if (labels.empty()) {
    throw std::invalid_argument("no labels to accumulate");
  }
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) {
    ++sizes[l];
  }
  ProgressionSeries s;
  s.N = labels.size();
  s.order.assign(labels.begin(), labels.end());
  std::map<std::size_t, std::size_t> slot;
  for (const auto& [label, size] : sizes) {
    slot[label] = s.clusters.size();
    ClusterSeries c;
    c.label = label;
    c.size = size;
    c.counts.reserve(s.N);
    c.fraction.reserve(s.N);
    s.clusters.push_back(std::move(c));
  }
  std::vector<std::size_t> running(s.clusters.size(), 0);
  for (auto l : labels) {
    ++running[slot[l]];
    for (std::size_t c = 0; c < s.clusters.size(); ++c) {
      auto& cs = s.clusters[c];
      cs.counts.push_back(running[c]);
      cs.fraction.push_back(static_cast<double>(running[c]) / static_cast<double>(cs.size));
    }
  }
  return s;
}

BandSpec hypergeometric_bands(std::size_t N, std::span<const std::size_t> sizes) {
  if (N == 0) {
    throw std::invalid_argument("bands need at least one vote");
  }
  std::size_t total = 0;
  for (auto c : sizes) {
    if (c == 0) {
      throw std::invalid_argument("cluster sizes must be positive");
    }
    total += c;
  }
  if (total != N) {
    throw std::invalid_argument("cluster sizes do not sum to N");
  }
  BandSpec b;
  b.N = N;
  b.sizes.assign(sizes.begin(), sizes.end());
  const double dn = static_cast<double>(N);
  for (auto c : sizes) {
    std::vector<double> sig(N + 1, 0.0);
    if (N > 1) {
      const double p = static_cast<double>(c) / dn;
      for (std::size_t n = 1; n < N; ++n) {
        const double x = static_cast<double>(n);
        sig[n] = std::sqrt(x * p * (1.0 - p) * (dn - x) / (dn - 1.0)) / static_cast<double>(c);
      }
    }
    b.sigma.push_back(std::move(sig));
  }
  return b;
}

BandSpec hypergeometric_bands(const ProgressionSeries& series) {
  std::vector<std::size_t> sizes;
  for (const auto& c : series.clusters) {
    sizes.push_back(c.size);
  }
  return hypergeometric_bands(series.N, sizes);
}

ExcursionReport scan_excursions(const ProgressionSeries& series, const BandSpec& bands,
                                std::span<const double> z_levels) {
  if (series.N != bands.N || series.clusters.size() != bands.sizes.size()) {
    throw std::invalid_argument("series and bands describe different vote sets");
  }
  ExcursionReport rep;
  rep.N = series.N;
  rep.z_levels.assign(z_levels.begin(), z_levels.end());
  for (std::size_t c = 0; c < series.clusters.size(); ++c) {
    const auto& cs = series.clusters[c];
    if (cs.size != bands.sizes[c]) {
      throw std::invalid_argument("series and bands disagree on cluster sizes");
    }
    ClusterExcursions ce;
    ce.label = cs.label;
    ce.by_level.resize(z_levels.size());
    ce.positions_beyond.assign(z_levels.size(), 0);
    std::vector<double> z(series.N + 1, 0.0);
    for (std::size_t n = 1; n <= series.N; ++n) {
      const double sd = bands.sigma[c][n];
      z[n] = sd > 0.0 ? (cs.fraction[n - 1] - bands.mean(n)) / sd : 0.0;
      ce.max_z = std::max(ce.max_z, std::abs(z[n]));
      ce.max_z_above = std::max(ce.max_z_above, z[n]);
      ce.max_z_below = std::max(ce.max_z_below, -z[n]);
    }
    for (std::size_t l = 0; l < z_levels.size(); ++l) {
      const double level = z_levels[l];
      auto& runs = ce.by_level[l];
      for (std::size_t n = 1; n <= series.N; ++n) {
        const int sign = z[n] > level ? 1 : (z[n] < -level ? -1 : 0);
        if (sign == 0) {
          continue;
        }
        ++ce.positions_beyond[l];
        if (!runs.empty() && runs.back().end + 1 == n && runs.back().sign == sign) {
          runs.back().end = n;
          runs.back().peak_z = std::max(runs.back().peak_z, std::abs(z[n]));
        } else {
          runs.push_back(Excursion{n, n, sign, std::abs(z[n])});
        }
      }
    }
    rep.max_z = std::max(rep.max_z, ce.max_z);
    rep.clusters.push_back(std::move(ce));
  }
  return rep;
}

double ExcursionReport::fraction_beyond(std::size_t level) const {
  if (clusters.empty() || N == 0) {
    return 0.0;
  }
  std::size_t total = 0;
  for (const auto& c : clusters) {
    total += c.positions_beyond.at(level);
  }
  return static_cast<double>(total) / static_cast<double>(clusters.size() * N);
}

Table ExcursionReport::to_table() const {
  Table t;
  t.name = "excursions";
  t.header = {"cluster", "z", "start", "end", "sign", "peak_z"};
  for (const auto& c : clusters) {
    for (std::size_t l = 0; l < z_levels.size(); ++l) {
      for (const auto& e : c.by_level[l]) {
        t.add_row({std::to_string(c.label), format_fixed(z_levels[l], 2), std::to_string(e.start),
                   std::to_string(e.end), e.sign > 0 ? "+" : "-", format_fixed(e.peak_z, 4)});
      }
    }
  }
  return t;
}

DailyProportions daily_cluster_proportions(std::span<const std::pair<Day, std::size_t>> labelled) {
  if (labelled.empty()) {
    throw std::invalid_argument("no labelled responses");
  }
  DailyProportions out;
  std::map<std::size_t, std::size_t> slot;
  for (const auto& [d, l] : labelled) {
    slot.emplace(l, 0);
  }
  for (auto& [label, idx] : slot) {
    idx = out.labels.size();
    out.labels.push_back(label);
  }
  std::map<Day, std::vector<std::size_t>> per_day;
  for (const auto& [d, l] : labelled) {
    auto& counts = per_day[d];
    counts.resize(out.labels.size(), 0);
    ++counts[slot[l]];
  }
  for (const auto& [d, counts] : per_day) {
    DayShares ds;
    ds.day = d;
    for (auto c : counts) {
      ds.n += c;
    }
    for (auto c : counts) {
      ds.shares.push_back(static_cast<double>(c) / static_cast<double>(ds.n));
    }
    out.days.push_back(std::move(ds));
  }
  return out;
}

Table DailyProportions::to_table() const {
  Table t;
  t.name = "daily_proportions";
  t.header = {"date", "n"};
  for (auto l : labels) {
    t.header.push_back("cluster_" + std::to_string(l));
  }
  for (const auto& d : days) {
    std::vector<std::string> row{format_date(d.day), std::to_string(d.n)};
    for (double s : d.shares) {
      row.push_back(format_fixed(s, 6));
    }
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<ShuffleRange> within_day_shuffle_robustness(std::span<const std::pair<Day, std::size_t>> ordered,
                                                        std::size_t shuffles, std::uint64_t seed) {
  if (ordered.empty()) {
    throw std::invalid_argument("no labelled responses");
  }
  std::vector<std::pair<Day, std::size_t>> base(ordered.begin(), ordered.end());
  std::stable_sort(base.begin(), base.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ShuffleRange> out;
  const double z2[] = {2.0};
  for (std::size_t s = 0; s < shuffles; ++s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    auto v = base;
    for (std::size_t i = 0; i < v.size();) {
      std::size_t j = i;
      while (j < v.size() && v[j].first == v[i].first) {
        ++j;
      }
      std::shuffle(v.begin() + static_cast<std::ptrdiff_t>(i), v.begin() + static_cast<std::ptrdiff_t>(j), rng);
      i = j;
    }
    std::vector<std::size_t> labels;
    labels.reserve(v.size());
    for (const auto& p : v) {
      labels.push_back(p.second);
    }
    const auto series = cumulative_cluster_fraction(labels);
    const auto rep = scan_excursions(series, hypergeometric_bands(series), z2);
    if (out.empty()) {
      for (const auto& c : rep.clusters) {
        out.push_back(ShuffleRange{c.label, c.max_z_above, c.max_z_above});
      }
    } else {
      for (std::size_t c = 0; c < out.size(); ++c) {
        out[c].min_max_z = std::min(out[c].min_max_z, rep.clusters[c].max_z_above);
        out[c].max_max_z = std::max(out[c].max_max_z, rep.clusters[c].max_z_above);
      }
    }
  }
  return out;
}

Table progression_table(const ProgressionSeries& series, const BandSpec& bands) {
  if (series.N != bands.N) {
    throw std::invalid_argument("series and bands describe different vote sets");
  }
  Table t;
  t.name = "progression";
  t.header = {"position", "mean"};
  for (const auto& c : series.clusters) {
    const std::string p = "cluster_" + std::to_string(c.label) + "_";
    for (const char* suffix : {"frac", "lo1", "hi1", "lo2", "hi2"}) {
      t.header.push_back(p + suffix);
    }
  }
  for (std::size_t n = 0; n <= series.N; ++n) {
    const double mean = bands.mean(n);
    std::vector<std::string> row{std::to_string(n), format_fixed(mean, 6)};
    for (std::size_t c = 0; c < series.clusters.size(); ++c) {
      const double f = n == 0 ? 0.0 : series.clusters[c].fraction[n - 1];
      const double sd = bands.sigma[c][n];
      for (double v : {f, mean - sd, mean + sd, mean - 2 * sd, mean + 2 * sd}) {
        row.push_back(format_fixed(v, 6));
      }
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace pbf
