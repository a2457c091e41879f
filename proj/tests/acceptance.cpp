// Acceptance runner: one PASS/FAIL/SKIP line per criterion. Tolerances and
// runtime budgets are pinned below; `--only <name>` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mixtures.hpp"
#include "pbf/aggregate.hpp"
#include "pbf/cluster.hpp"
#include "pbf/datastore.hpp"
#include "pbf/progression.hpp"
#include "pbf/simulator.hpp"
#include "pbf/spec_io.hpp"
#include "pbf/stats.hpp"

using namespace pbf;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome = Outcome::fail;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Verdict()> run;
};

Verdict verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(PBF_DATA_DIR) / "published_tables" / name;
}

// ---------------------------------------------------------------- chi-square

Verdict chi2_scenario() {
  const auto table = load_crosstab(fixture("followup_scenario_by_cluster.csv")).select_columns({"rev-A", "rev-B", "rev-C"});
  const auto gof = per_row_gof(table);
  if (gof.size() != 3) {
    return verdict(false, fmt::format("expected 3 cluster rows, got {}", gof.size()));
  }
  const bool ok = gof[0].p >= 0.03 && gof[0].p <= 0.06 && gof[1].p < 0.005 && gof[2].p < 0.005;
  return verdict(ok, fmt::format("p = [{:.4f}, {:.4f}, {:.6f}], want [0.03..0.06, <0.005, <0.005]", gof[0].p,
                                 gof[1].p, gof[2].p));
}

Verdict chi2_police() {
  const auto table = load_crosstab(fixture("followup_police_by_cluster.csv"));
  const auto gof = per_row_gof(table);
  if (gof.size() < 2) {
    return verdict(false, "fewer than two cluster rows");
  }
  const auto& r = gof[1];
  const bool ok = r.p < 1e-5 && std::abs(r.statistic - 34.2) <= 0.05 && r.df == 3;
  return verdict(ok, fmt::format("cluster 1: chi2 = {:.4f} (want 34.2 +- 0.05), df = {}, p = {:.3g} (want < 1e-5)",
                                 r.statistic, r.df, r.p));
}

Verdict spearman() {
  const auto table = load_crosstab(fixture("followup_police_crosstab.csv"));
  const auto r = spearman_rho(table);
  // diagnostic only: a non-ordinal column coding that lands near 0.37
  const auto alt =
      spearman_rho(table.select_columns({"more_funding", "not_enough", "agree", "right_direction_too_much"}));
  const bool ok = std::abs(std::abs(r.rho) - 0.37) <= 0.02 && r.n == 195;
  return verdict(ok, fmt::format("|rho| = {:.4f} on n = {} (want 0.37 +- 0.02); non-ordinal coding gives {:.4f}",
                                 std::abs(r.rho), r.n, alt.rho));
}

// --------------------------------------------------------------- aggregation

// Straight enumeration of every balanced, floor-respecting grid vector in the
// box [-r, r]^m; returns the least summed weighted L1 distance.
std::int64_t enumerate_optimum(const std::vector<std::int64_t>& min_steps, const std::vector<StepVector>& ballots,
                               const std::vector<std::int64_t>& w, std::int64_t r) {
  const std::size_t m = min_steps.size();
  StepVector x(m, -r);
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (;;) {
    std::int64_t sum = 0;
    bool ok = true;
    for (std::size_t a = 0; a < m; ++a) {
      sum += x[a];
      ok = ok && x[a] >= min_steps[a];
    }
    if (ok && sum == 0) {
      std::int64_t f = 0;
      for (std::size_t i = 0; i < ballots.size(); ++i) {
        for (std::size_t a = 0; a < m; ++a) {
          f += w[i] * std::abs(ballots[i][a] - x[a]);
        }
      }
      best = std::min(best, f);
    }
    std::size_t a = 0;
    while (a < m && x[a] == r) {
      x[a] = -r;
      ++a;
    }
    if (a == m) {
      return best;
    }
    ++x[a];
  }
}

Verdict aggregation_oracle() {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_areas(1, 4);
  std::uniform_int_distribution<int> n_ballots(1, 7);
  std::uniform_int_distribution<Cents> base(10, 120);
  std::uniform_int_distribution<std::int64_t> delta(-3, 3);
  std::uniform_int_distribution<std::int64_t> weight(1, 3);
  std::size_t mismatches = 0;
  std::size_t floor_bound = 0;
  std::string first;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = static_cast<std::size_t>(n_areas(rng));
    std::vector<ServiceArea> areas;
    std::vector<std::int64_t> min_steps;
    for (std::size_t a = 0; a < m; ++a) {
      const Cents b = base(rng);
      areas.push_back({"a" + std::to_string(a), "", b});
      // smallest integer d with (b + d) * 20 >= 19 * b
      std::int64_t d = -b;
      while ((b + d) * 20 < 19 * b) {
        ++d;
      }
      min_steps.push_back(d);
    }
    const BudgetSpec spec(areas, 1, Ratio{1, 20});
    const std::size_t n = static_cast<std::size_t>(n_ballots(rng));
    std::vector<StepVector> ballots;
    while (ballots.size() < n) {
      StepVector v(m);
      std::int64_t sum = 0;
      bool ok = true;
      for (std::size_t a = 0; a < m; ++a) {
        v[a] = delta(rng);
        sum += v[a];
        ok = ok && v[a] >= min_steps[a];
      }
      if (ok && sum == 0) {
        ballots.push_back(std::move(v));
      }
    }
    std::vector<std::int64_t> w(n, 1);
    std::vector<double> wd(n, 1.0);
    if (trial % 2 == 1) {
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = weight(rng);
        wd[i] = static_cast<double>(w[i]);
      }
    }
    const auto got = knapsack_aggregate(spec, ballots, wd);
    const std::int64_t want = enumerate_optimum(min_steps, ballots, w, 6);
    std::int64_t recomputed = 0;
    std::int64_t sum = 0;
    bool feasible = got.steps.size() == m;
    for (std::size_t a = 0; feasible && a < m; ++a) {
      sum += got.steps[a];
      feasible = got.steps[a] >= min_steps[a];
      floor_bound += got.steps[a] == min_steps[a];
    }
    for (std::size_t i = 0; feasible && i < n; ++i) {
      for (std::size_t a = 0; a < m; ++a) {
        recomputed += w[i] * std::abs(ballots[i][a] - got.steps[a]);
      }
    }
    const bool ok = feasible && sum == 0 && got.objective == static_cast<double>(want) && recomputed == want;
    if (!ok && mismatches++ == 0) {
      first = fmt::format("; first mismatch trial {}: objective {} vs optimum {}", trial, got.objective, want);
    }
  }
  return verdict(mismatches == 0,
                 fmt::format("{} of 200 instances differ from enumeration ({} floor-bound coordinates){}", mismatches,
                             floor_bound, first));
}

// ---------------------------------------------------------------- clustering

Verdict gap_recovery() {
  const KMeansOptions options{3, 100, 1e-6};
  std::vector<int> correct;
  bool ok = true;
  for (std::size_t k = 1; k <= 5; ++k) {
    int hits = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Matrix x = testing::planted_mixture(k, 2, 50, 6.0, 1000 * k + s);
      hits += gap_statistic(x, 8, 10, 77 + s, options).chosen_k == k;
    }
    correct.push_back(hits);
    ok = ok && hits >= 16;
  }
  return verdict(ok, fmt::format("correct of 20 for k = 1..5: [{}] (want >= 16 each)", fmt::join(correct, ", ")));
}

Verdict bootstrap() {
  const Matrix x = testing::planted_mixture(3, 4, 100, 8.0, 31);
  const auto r = bootstrap_stability(x, 3, 100, 5);
  return verdict(r.accuracy >= 0.97,
                 fmt::format("accuracy {:.4f} over {} replicates (want >= 0.97)", r.accuracy, r.used));
}

// --------------------------------------------------------------- progression

Verdict shock_calibration() {
  const std::vector<double> z{1.0, 2.0};
  const std::vector<double> shares{0.35, 0.40, 0.25};
  double beyond = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto labels = null_schedule(2000, shares, 500 + s);
    const auto series = cumulative_cluster_fraction(labels);
    beyond += scan_excursions(series, hypergeometric_bands(series), z).fraction_beyond(1);
  }
  beyond /= 100.0;

  TurnoutSchedule schedule;
  schedule.horizon_days = 60;
  schedule.base_rate = {6, 8, 6};
  schedule.shock = Shock{0, 10, {5, 1, 1}};
  const Day start = day_of(parse_timestamp("2020-05-01"));
  int detected = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::vector<std::size_t> labels;
    for (const auto& a : simulate_arrivals(schedule, start, 900 + s)) {
      labels.push_back(a.cluster);
    }
    const auto series = cumulative_cluster_fraction(labels);
    const auto report = scan_excursions(series, hypergeometric_bands(series), z);
    detected += report.clusters.at(0).max_z_above > 2.0;
  }
  const bool null_ok = beyond <= 0.01;
  const bool shock_ok = detected >= 95;
  return verdict(null_ok && shock_ok,
                 fmt::format("null: {:.2f}% of positions beyond 2 sigma (want <= 1%) [{}]; x5 shock: boosted "
                             "cluster beyond +2 sigma in {}/100 seeds (want >= 95) [{}]",
                             100.0 * beyond, null_ok ? "ok" : "fails", detected, shock_ok ? "ok" : "fails"));
}

// ------------------------------------------------------------------- ballots

struct RandomBallot {
  std::vector<Cents> baseline;
  std::vector<Cents> alloc;
  Cents increment = 1;
  Ratio floor;
  bool extra_area = false;
  bool missing_area = false;
};

// Acceptance iff balance, grid and floor hold, written out directly on cents.
bool straight_line_valid(const RandomBallot& b) {
  if (b.extra_area || b.missing_area) {
    return false;
  }
  Cents total = 0;
  Cents spent = 0;
  for (std::size_t i = 0; i < b.baseline.size(); ++i) {
    total += b.baseline[i];
    spent += b.alloc[i];
    if ((b.alloc[i] - b.baseline[i]) % b.increment != 0) {
      return false;
    }
    if (b.alloc[i] * b.floor.den < b.baseline[i] * (b.floor.den - b.floor.num)) {
      return false;
    }
  }
  return total == spent;
}

Verdict ballot_validation() {
  std::mt19937_64 rng(2020);
  std::uniform_int_distribution<int> n_areas(1, 8);
  std::uniform_int_distribution<Cents> base(0, 500);
  std::uniform_int_distribution<int> step(-4, 4);
  std::uniform_int_distribution<int> pick(0, 99);
  const std::vector<Cents> increments{1, 25, 100};
  const std::vector<Ratio> floors{{1, 20}, {1, 10}, {0, 1}};
  std::size_t disagreements = 0;
  std::size_t accepted = 0;
  std::string first;
  for (int trial = 0; trial < 10'000; ++trial) {
    RandomBallot b;
    b.increment = increments[static_cast<std::size_t>(pick(rng)) % increments.size()];
    b.floor = floors[static_cast<std::size_t>(pick(rng)) % floors.size()];
    const int m = n_areas(rng);
    std::vector<ServiceArea> areas;
    for (int i = 0; i < m; ++i) {
      b.baseline.push_back(base(rng) * b.increment);
      areas.push_back({"a" + std::to_string(i), "", b.baseline.back()});
    }
    b.alloc = b.baseline;
    // balanced grid moves between random pairs, then occasional damage
    for (int moves = pick(rng) % 4; moves > 0 && m > 1; --moves) {
      const auto from = static_cast<std::size_t>(pick(rng) % m);
      const auto to = static_cast<std::size_t>(pick(rng) % m);
      const Cents amount = step(rng) * b.increment;
      b.alloc[from] -= amount;
      b.alloc[to] += amount;
    }
    const int damage = pick(rng);
    if (damage < 10) {
      b.alloc[static_cast<std::size_t>(pick(rng) % m)] += 1 + pick(rng) % 3;
    } else if (damage < 15) {
      b.alloc[static_cast<std::size_t>(pick(rng) % m)] += b.increment;
    } else if (damage < 18) {
      b.extra_area = true;
    } else if (damage < 21) {
      b.missing_area = true;
    }
    const BudgetSpec spec(areas, b.increment, b.floor);
    ExpenditureBallot ballot;
    for (int i = 0; i < m; ++i) {
      if (!(b.missing_area && i == 0)) {
        ballot.allocation["a" + std::to_string(i)] = b.alloc[static_cast<std::size_t>(i)];
      }
    }
    if (b.extra_area) {
      ballot.allocation["zz"] = 0;
    }
    const bool want = straight_line_valid(b);
    const bool got = validate_expenditure(spec, ballot).valid();
    accepted += got;
    if (want != got && disagreements++ == 0) {
      first = fmt::format("; first at trial {} (checker {}, library {})", trial, want, got);
    }
  }
  return verdict(disagreements == 0,
                 fmt::format("{} disagreements over 10000 ballots, {} accepted{}", disagreements, accepted, first));
}

// --------------------------------------------------------------- integration

Verdict dataset_integration() {
  const char* path = std::getenv("PBF_AUSTIN2020_RESPONSES");
  if (!path || !*path) {
    return {Outcome::skip, "set PBF_AUSTIN2020_RESPONSES to a canonical 2020 responses CSV to run"};
  }
  const auto spec = resolve_budget_spec("austin2020");
  const auto log = load_responses(path, spec).log;
  const TimePoint cut = parse_timestamp("2020-05-29");
  const auto early = [&](std::size_t i) {
    const auto seg = log.segment(i);
    return seg ? *seg == 0 : log.records()[i].timestamp < cut;
  };

  std::vector<StepVector> late;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (const auto* b = log.records()[i].expenditure_ballot(); b && !early(i)) {
      late.push_back(to_steps(spec, *b));
    }
  }
  const auto agg = knapsack_aggregate(spec, late);
  const auto& apd = agg.areas.at(*spec.area_index("APD"));
  const bool agg_ok = std::abs(100.0 * apd.change_pct + 2.99) <= 0.10 &&
                      std::llround(static_cast<double>(apd.change) / 1e7) == -130;

  // arrival order, clustered on the full encoding
  std::vector<std::size_t> order(log.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return log.records()[a].timestamp < log.records()[b].timestamp;
  });
  std::vector<ResponseRecord> sorted;
  for (auto i : order) {
    sorted.push_back(log.records()[i]);
  }
  const auto schema = EncodingSchema::for_spec(spec);
  const auto encoded = encode_responses(sorted, schema);
  const auto model = kmeans_fit(normalize_features(encoded.matrix), 3, 2020);
  std::vector<std::size_t> pre_counts(3, 0);
  std::size_t pre_n = 0;
  for (std::size_t r = 0; r < encoded.record_index.size(); ++r) {
    if (early(order[encoded.record_index[r]])) {
      ++pre_counts[model.labels[r]];
      pre_n = r + 1;
    }
  }
  const auto dominant =
      static_cast<std::size_t>(std::max_element(pre_counts.begin(), pre_counts.end()) - pre_counts.begin());
  const auto series = cumulative_cluster_fraction(model.labels);
  const auto bands = hypergeometric_bands(series);
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& c : series.clusters) {
    if (c.label != dominant) {
      continue;
    }
    for (std::size_t n = 1; n <= pre_n; ++n) {
      const double sd = bands.sigma.at(c.label)[n];
      if (sd > 0) {
        peak = std::max(peak, (c.fraction[n - 1] - bands.mean(n)) / sd);
      }
    }
  }
  const bool prog_ok = peak > 2.0;
  return verdict(agg_ok && prog_ok,
                 fmt::format("APD change {:.1f}M ({:.2f}%, want -13.0M, -2.99% +- 0.10) [{}]; dominant pre-shock "
                             "cluster peak z {:.2f} in the first {} positions (want > 2) [{}]",
                             static_cast<double>(apd.change) / 1e8, 100.0 * apd.change_pct, agg_ok ? "ok" : "fails",
                             peak, pre_n, prog_ok ? "ok" : "fails"));
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"chi2_scenario", 1.0, chi2_scenario},
      {"chi2_police", 1.0, chi2_police},
      {"spearman", 1.0, spearman},
      {"aggregation_oracle", 10.0, aggregation_oracle},
      {"gap_recovery", 120.0, gap_recovery},
      {"bootstrap", 60.0, bootstrap},
      {"shock_calibration", 120.0, shock_calibration},
      {"ballot_validation", 5.0, ballot_validation},
      {"dataset_integration", 600.0, dataset_integration},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string only;
  bool list = false;
  app.add_option("--only", only, "run a single criterion");
  app.add_flag("--list", list, "print criterion names");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : criteria()) {
      std::cout << c.name << '\n';
    }
    return 0;
  }
  bool any = false;
  bool all_ok = true;
  for (const auto& c : criteria()) {
    if (!only.empty() && c.name != only) {
      continue;
    }
    any = true;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.outcome == Outcome::pass && secs > c.budget_seconds) {
      v.outcome = Outcome::fail;
      v.detail += fmt::format("; over the {:g} s budget", c.budget_seconds);
    }
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::skip ? "SKIP" : "FAIL";
    std::cout << fmt::format("{} {}: {} ({:.3f} s)", tag, c.name, v.detail, secs) << std::endl;
    all_ok = all_ok && v.outcome != Outcome::fail;
    if (!only.empty() && v.outcome == Outcome::skip) {
      return 77;
    }
  }
  if (!any) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 1;
  }
  return all_ok ? 0 : 1;
}
