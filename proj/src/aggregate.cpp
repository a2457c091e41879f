#include "pbf/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "pbf/cluster.hpp"

namespace pbf {

namespace {

std::vector<double> resolve_weights(std::size_t n, std::span<const double> weights) {
  if (weights.empty()) {
    return std::vector<double>(n, 1.0);
  }
  if (weights.size() != n) {
    throw std::invalid_argument("weight count " + std::to_string(weights.size()) + " does not match ballot count " +
                                std::to_string(n));
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be finite and non-negative");
    }
  }
  return {weights.begin(), weights.end()};
}

std::size_t common_width(std::span<const StepVector> ballots) {
  if (ballots.empty()) {
    throw std::invalid_argument("no ballots to aggregate");
  }
  const std::size_t m = ballots.front().size();
  for (const auto& b : ballots) {
    if (b.size() != m) {
      throw std::invalid_argument("ballots have differing numbers of areas");
    }
  }
  return m;
}

// Sorted (value, cumulative weight) per area, the basis for both the median
// and the marginal L1 costs.
struct AreaProfile {
  std::vector<std::int64_t> values;
  std::vector<double> cum;  // cum[i] = weight of values[0..i]
  double total = 0.0;

  // Weight of ballots with value <= x.
  double weight_le(std::int64_t x) const {
    auto it = std::upper_bound(values.begin(), values.end(), x);
    if (it == values.begin()) {
      return 0.0;
    }
    return cum[static_cast<std::size_t>(it - values.begin()) - 1];
  }
};

std::vector<AreaProfile> build_profiles(std::span<const StepVector> ballots, const std::vector<double>& w) {
  const std::size_t m = common_width(ballots);
  std::vector<AreaProfile> out(m);
  std::vector<std::pair<std::int64_t, double>> pairs;
  for (std::size_t a = 0; a < m; ++a) {
    pairs.clear();
    for (std::size_t i = 0; i < ballots.size(); ++i) {
      if (w[i] > 0.0) {
        pairs.emplace_back(ballots[i][a], w[i]);
      }
    }
    if (pairs.empty()) {
      throw std::invalid_argument("all ballot weights are zero");
    }
    std::sort(pairs.begin(), pairs.end());
    auto& p = out[a];
    double acc = 0.0;
    for (const auto& [v, wt] : pairs) {
      acc += wt;
      if (!p.values.empty() && p.values.back() == v) {
        p.cum.back() = acc;
      } else {
        p.values.push_back(v);
        p.cum.push_back(acc);
      }
    }
    p.total = acc;
  }
  return out;
}

// Greedy single-increment repair toward sum(x) == 0 with x >= lower. Optimal
// for separable convex costs when x starts at the coordinate-wise minimizer.
template <class UpCost, class DownCost>
StepVector greedy_balance(StepVector x, const std::vector<std::int64_t>& lower, UpCost up, DownCost down) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::max(x[i], lower[i]);
  }
  std::int64_t imbalance = std::accumulate(x.begin(), x.end(), std::int64_t{0});
  while (imbalance > 0) {
    std::optional<std::size_t> best;
    double best_cost = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] <= lower[i]) {
        continue;
      }
      const double c = down(i, x[i]);
      if (!best || c < best_cost) {
        best = i;
        best_cost = c;
      }
    }
    if (!best) {
      throw InfeasibleError("cannot balance the budget without cutting an area below its floor");
    }
    --x[*best];
    --imbalance;
  }
  while (imbalance < 0) {
    std::size_t best = 0;
    double best_cost = up(0, x[0]);
    for (std::size_t i = 1; i < x.size(); ++i) {
      const double c = up(i, x[i]);
      if (c < best_cost) {
        best = i;
        best_cost = c;
      }
    }
    ++x[best];
    ++imbalance;
  }
  return x;
}

std::vector<std::int64_t> floor_steps(const BudgetSpec& spec) {
  std::vector<std::int64_t> lower(spec.areas().size());
  for (std::size_t i = 0; i < lower.size(); ++i) {
    lower[i] = spec.min_delta_steps(i);
  }
  return lower;
}

std::string group_thousands(std::string digits) {
  std::string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i && (n - i) % 3 == 0) {
      out.push_back(',');
    }
    out.push_back(digits[i]);
  }
  return out;
}

std::string format_dollars(Cents c, bool grouped) {
  const bool neg = c < 0;
  const auto mag = static_cast<std::uint64_t>(neg ? -(c + 1) : c) + (neg ? 1U : 0U);
  std::string whole = std::to_string(mag / 100);
  if (grouped) {
    whole = group_thousands(whole);
  }
  const auto frac = mag % 100;
  return (neg ? "-" : "") + whole + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
}

}  // namespace

StepVector to_steps(const BudgetSpec& spec, const ExpenditureBallot& ballot) {
  StepVector out(spec.areas().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& area = spec.areas()[i];
    auto it = ballot.allocation.find(area.id);
    if (it == ballot.allocation.end()) {
      throw std::invalid_argument("ballot has no allocation for area '" + area.id + "'");
    }
    const Cents delta = it->second - area.baseline;
    if (delta % spec.increment() != 0) {
      throw std::invalid_argument("allocation for area '" + area.id + "' is off the increment grid");
    }
    out[i] = delta / spec.increment();
  }
  return out;
}

ExpenditureBallot from_steps(const BudgetSpec& spec, const StepVector& steps) {
  if (steps.size() != spec.areas().size()) {
    throw std::invalid_argument("step vector width does not match the number of areas");
  }
  ExpenditureBallot b;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& area = spec.areas()[i];
    b.allocation[area.id] = area.baseline + steps[i] * spec.increment();
  }
  return b;
}

double l1_objective(const StepVector& x, std::span<const StepVector> ballots, std::span<const double> weights) {
  const auto w = resolve_weights(ballots.size(), weights);
  double total = 0.0;
  for (std::size_t i = 0; i < ballots.size(); ++i) {
    if (ballots[i].size() != x.size()) {
      throw std::invalid_argument("ballot width does not match");
    }
    std::int64_t d = 0;
    for (std::size_t a = 0; a < x.size(); ++a) {
      d += std::abs(ballots[i][a] - x[a]);
    }
    total += w[i] * static_cast<double>(d);
  }
  return total;
}

StepVector coordinate_median(std::span<const StepVector> ballots, std::span<const double> weights) {
  const auto w = resolve_weights(ballots.size(), weights);
  const auto profiles = build_profiles(ballots, w);
  StepVector out(profiles.size());
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    const auto& p = profiles[a];
    const double half = p.total / 2.0;
    auto it = std::lower_bound(p.cum.begin(), p.cum.end(), half);
    out[a] = p.values[static_cast<std::size_t>(it - p.cum.begin())];
  }
  return out;
}

AggregateBudget rebalance(const StepVector& median, const BudgetSpec& spec, std::span<const StepVector> ballots,
                          std::span<const double> weights) {
  const std::size_t m = spec.areas().size();
  if (median.size() != m) {
    throw std::invalid_argument("median width does not match the number of areas");
  }
  const auto w = resolve_weights(ballots.size(), weights);
  const auto profiles = build_profiles(ballots, w);
  if (profiles.size() != m) {
    throw std::invalid_argument("ballot width does not match the number of areas");
  }
  auto up = [&](std::size_t a, std::int64_t x) { return 2.0 * profiles[a].weight_le(x) - profiles[a].total; };
  auto down = [&](std::size_t a, std::int64_t x) { return profiles[a].total - 2.0 * profiles[a].weight_le(x - 1); };
  const StepVector steps = greedy_balance(median, floor_steps(spec), up, down);

  AggregateBudget out;
  out.steps = steps;
  out.objective = l1_objective(steps, ballots, w);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& area = spec.areas()[i];
    AreaChange ch{area.id, area.name, area.baseline, steps[i] * spec.increment(), 0.0};
    ch.change_pct = area.baseline == 0 ? 0.0 : static_cast<double>(ch.change) / static_cast<double>(area.baseline);
    out.areas.push_back(std::move(ch));
  }
  const auto report = validate_expenditure(spec, out.as_ballot());
  if (!report.valid()) {
    throw std::logic_error("rebalanced budget fails validation: " + report.summary());
  }
  return out;
}

AggregateBudget knapsack_aggregate(const BudgetSpec& spec, std::span<const StepVector> ballots,
                                   std::span<const double> weights) {
  return rebalance(coordinate_median(ballots, weights), spec, ballots, weights);
}

AggregateBudget knapsack_aggregate(const BudgetSpec& spec, std::span<const ExpenditureBallot> ballots,
                                   std::span<const double> weights) {
  std::vector<StepVector> steps;
  steps.reserve(ballots.size());
  for (const auto& b : ballots) {
    steps.push_back(to_steps(spec, b));
  }
  return knapsack_aggregate(spec, std::span<const StepVector>(steps), weights);
}

StepVector repair_ballot(std::span<const double> draw, const BudgetSpec& spec) {
  if (draw.size() != spec.areas().size()) {
    throw std::invalid_argument("draw width does not match the number of areas");
  }
  StepVector start(draw.size());
  for (std::size_t i = 0; i < draw.size(); ++i) {
    if (!std::isfinite(draw[i])) {
      throw std::invalid_argument("non-finite draw");
    }
    start[i] = static_cast<std::int64_t>(std::floor(draw[i] + 0.5));
  }
  auto cost = [&](std::size_t a, std::int64_t x) { return std::abs(static_cast<double>(x) - draw[a]); };
  auto up = [&](std::size_t a, std::int64_t x) { return cost(a, x + 1) - cost(a, x); };
  auto down = [&](std::size_t a, std::int64_t x) { return cost(a, x - 1) - cost(a, x); };
  return greedy_balance(std::move(start), floor_steps(spec), up, down);
}

ExpenditureBallot AggregateBudget::as_ballot() const {
  ExpenditureBallot b;
  for (const auto& a : areas) {
    b.allocation[a.area_id] = a.baseline + a.change;
  }
  return b;
}

Table AggregateBudget::to_table() const {
  Table t;
  t.name = "aggregate_budget";
  t.header = {"area_id", "service_area", "original_budget", "proposed_change", "change_pct"};
  for (const auto& a : areas) {
    t.add_row({a.area_id, a.name, format_dollars(a.baseline, false), format_dollars(a.change, false),
               format_fixed(100.0 * a.change_pct, 2)});
  }
  return t;
}

std::string AggregateBudget::to_markdown() const {
  std::ostringstream out;
  out << "| Service Area | Original Budget | Proposed Change | Change % |\n";
  out << "|---|---:|---:|---:|\n";
  for (const auto& a : areas) {
    out << "| " << a.name << " | " << format_dollars(a.baseline, true) << " | ";
    if (a.change == 0) {
      out << "- | - |\n";
    } else {
      out << format_dollars(a.change, true) << " | " << format_fixed(100.0 * a.change_pct, 2) << "% |\n";
    }
  }
  return out.str();
}

double Distribution::proportion(std::string_view level) const {
  for (const auto& s : shares) {
    if (s.level == level) {
      return s.proportion;
    }
  }
  throw std::out_of_range("distribution '" + question_id + "' has no level '" + std::string(level) + "'");
}

Distribution tally_distribution(std::string question_id, const std::vector<std::string>& levels,
                                std::span<const std::optional<std::size_t>> answers, std::span<const double> weights) {
  const auto w = resolve_weights(answers.size(), weights);
  std::vector<double> acc(levels.size(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (!answers[i]) {
      continue;
    }
    if (*answers[i] >= levels.size()) {
      throw std::out_of_range("answer level out of range for '" + question_id + "'");
    }
    acc[*answers[i]] += w[i];
    ++n;
  }
  const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
  if (n == 0 || !(total > 0.0)) {
    throw DataError("no answered responses for '" + question_id + "'");
  }
  Distribution d;
  d.question_id = std::move(question_id);
  d.n = n;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    d.shares.push_back(LevelShare{levels[l], acc[l] / total, acc[l]});
  }
  return d;
}

const std::vector<std::string>& tally_levels(const Question& q) {
  if (q.kind == QuestionKind::expenditure_delta) {
    return likert_level_labels();
  }
  return q.level_labels;
}

std::optional<std::size_t> tally_level_index(const ResponseRecord& record, const Question& q) {
  const auto code = answer_code(record, q);
  if (!code) {
    return std::nullopt;
  }
  if (q.kind == QuestionKind::expenditure_delta) {
    const auto level = expenditure_level(static_cast<Cents>(*code) * q.increment, q.baseline);
    return static_cast<std::size_t>(static_cast<int>(level) + 2);
  }
  return static_cast<std::size_t>(*code - q.min_code);
}

Distribution tally_question(std::span<const ResponseRecord> records, const Question& q,
                            std::span<const double> weights) {
  std::vector<std::optional<std::size_t>> answers;
  answers.reserve(records.size());
  for (const auto& r : records) {
    answers.push_back(tally_level_index(r, q));
  }
  return tally_distribution(q.id, tally_levels(q), answers, weights);
}

Table distributions_table(std::span<const Distribution> distributions) {
  Table t;
  t.name = "distributions";
  t.header = {"question_id", "level", "proportion", "n"};
  for (const auto& d : distributions) {
    for (const auto& s : d.shares) {
      t.add_row({d.question_id, s.level, format_fixed(s.proportion, 6), std::to_string(d.n)});
    }
  }
  return t;
}

PBTally pb_knapsack_tally(const PBElectionLog& election) {
  if (election.votes.empty() || election.projects.empty()) {
    throw DataError("election '" + election.election_id + "' has no votes or no projects");
  }
  PBTally out;
  std::map<std::string, std::size_t> index;
  for (const auto& p : election.projects) {
    index.emplace(p.id, out.project_ids.size());
    out.project_ids.push_back(p.id);
  }
  out.approvals.assign(out.project_ids.size(), 0);
  const double slack = 1e-9 * std::max(1.0, std::abs(election.budget));
  for (const auto& v : election.votes) {
    double spent = 0.0;
    for (const auto& [pid, amount] : v.allocation) {
      auto it = index.find(pid);
      if (it == index.end()) {
        throw DataError("voter '" + v.voter_id + "' allocated to unknown project '" + pid + "'");
      }
      if (amount < 0.0) {
        throw DataError("voter '" + v.voter_id + "' has a negative allocation");
      }
      spent += amount;
      if (amount > 0.0) {
        ++out.approvals[it->second];
      }
    }
    if (spent > election.budget + slack) {
      throw DataError("voter '" + v.voter_id + "' exceeds the budget");
    }
  }
  std::vector<std::size_t> order(out.project_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.approvals[a] != out.approvals[b]) {
      return out.approvals[a] > out.approvals[b];
    }
    const double ca = election.projects[a].cost;
    const double cb = election.projects[b].cost;
    if (ca != cb) {
      return ca < cb;
    }
    return out.project_ids[a] < out.project_ids[b];
  });
  double remaining = election.budget;
  for (std::size_t p : order) {
    if (out.approvals[p] == 0) {
      break;
    }
    if (election.projects[p].cost <= remaining + slack) {
      remaining -= election.projects[p].cost;
      out.spent += election.projects[p].cost;
      out.winners.push_back(out.project_ids[p]);
    }
  }
  return out;
}

std::string level_label(const Question& q, int code) {
  if (q.kind == QuestionKind::expenditure_delta) {
    return (code > 0 ? "+" : "") + std::to_string(code) + " increments";
  }
  const int idx = code - q.min_code;
  if (idx < 0 || static_cast<std::size_t>(idx) >= q.level_labels.size()) {
    throw std::out_of_range("code " + std::to_string(code) + " out of range for '" + q.id + "'");
  }
  return q.level_labels[static_cast<std::size_t>(idx)];
}

ScenarioSet scenarios_from_centroids(const ClusterModel& model, const EncodingSchema& schema) {
  if (model.k < 2) {
    throw std::invalid_argument("scenarios need at least two clusters");
  }
  std::vector<const Question*> questions;
  for (const auto& col : model.columns) {
    const Question* q = schema.find(col);
    if (!q) {
      throw std::invalid_argument("model column '" + col + "' is not in the encoding schema");
    }
    questions.push_back(q);
  }
  std::vector<std::vector<int>> codes(model.k, std::vector<int>(questions.size()));
  for (std::size_t c = 0; c < model.k; ++c) {
    for (std::size_t j = 0; j < questions.size(); ++j) {
      const double scale = model.scales.empty() ? 1.0 : model.scales[j];
      const double v = model.centroids(c, j) * scale;
      auto code = static_cast<int>(std::floor(v + 0.5));
      if (questions[j]->kind != QuestionKind::expenditure_delta) {
        code = std::clamp(code, questions[j]->min_code, questions[j]->max_code);
      }
      codes[c][j] = code;
    }
  }
  ScenarioSet out;
  std::vector<std::size_t> keep;
  std::set<std::string> dropped;
  for (std::size_t j = 0; j < questions.size(); ++j) {
    bool agree = true;
    for (std::size_t c = 1; c < model.k; ++c) {
      agree = agree && codes[c][j] == codes[0][j];
    }
    if (agree) {
      dropped.insert(questions[j]->id);
    } else {
      keep.push_back(j);
      out.retained.push_back(questions[j]->id);
    }
  }
  dropped.insert(model.dropped_columns.begin(), model.dropped_columns.end());
  for (const auto& q : schema.questions()) {
    if (dropped.count(q.id)) {
      out.dropped.push_back(q.id);
    }
  }
  for (std::size_t c = 0; c < model.k; ++c) {
    Scenario s;
    s.id = "cluster-" + std::to_string(c);
    for (std::size_t j : keep) {
      s.levels.emplace_back(questions[j]->id, codes[c][j]);
    }
    out.scenarios.push_back(std::move(s));
  }
  return out;
}

Table ScenarioSet::to_table(const EncodingSchema& schema) const {
  Table t;
  t.name = "scenarios";
  t.header = {"question_id"};
  for (const auto& s : scenarios) {
    t.header.push_back(s.id);
  }
  for (std::size_t j = 0; j < retained.size(); ++j) {
    const Question* q = schema.find(retained[j]);
    std::vector<std::string> row{retained[j]};
    for (const auto& s : scenarios) {
      row.push_back(q ? level_label(*q, s.levels[j].second) : std::to_string(s.levels[j].second));
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace pbf
