#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbf/ballot.hpp"
#include "pbf/pb_election.hpp"
#include "pbf/table.hpp"

namespace pbf {

struct ClusterModel;

/// Per-area change expressed in increments of the spec's grid.
using StepVector = std::vector<std::int64_t>;

StepVector to_steps(const BudgetSpec& spec, const ExpenditureBallot& ballot);
ExpenditureBallot from_steps(const BudgetSpec& spec, const StepVector& steps);

/// Weighted sum over ballots of the L1 distance to x, in increments.
double l1_objective(const StepVector& x, std::span<const StepVector> ballots, std::span<const double> weights = {});

/// Per-area weighted lower median. Empty weights mean unit weights.
StepVector coordinate_median(std::span<const StepVector> ballots, std::span<const double> weights = {});

struct AreaChange {
  std::string area_id;
  std::string name;
  Cents baseline = 0;
  Cents change = 0;
  double change_pct = 0.0;  // change / baseline; 0 for a zero baseline
};

struct AggregateBudget {
  std::vector<AreaChange> areas;  // spec order
  StepVector steps;
  double objective = 0.0;  // weighted summed L1 distance, increments
  std::optional<std::string> weight_scheme_id;

  ExpenditureBallot as_ballot() const;
  /// area_id, service_area, original_budget, proposed_change, change_pct
  Table to_table() const;
  /// Human-readable table in dollars, "-" for unchanged areas.
  std::string to_markdown() const;
};

/// Moves `median` onto the balanced, floor-respecting grid by repeated
/// single-increment steps of least marginal L1 cost (lowest index on ties).
/// Throws InfeasibleError if the floors make balance impossible.
AggregateBudget rebalance(const StepVector& median, const BudgetSpec& spec, std::span<const StepVector> ballots,
                          std::span<const double> weights = {});

AggregateBudget knapsack_aggregate(const BudgetSpec& spec, std::span<const StepVector> ballots,
                                   std::span<const double> weights = {});
AggregateBudget knapsack_aggregate(const BudgetSpec& spec, std::span<const ExpenditureBallot> ballots,
                                   std::span<const double> weights = {});

/// Nearest balanced, floor-respecting grid vector to a real-valued draw
/// (in increments) under L1, via the same greedy repair.
StepVector repair_ballot(std::span<const double> draw, const BudgetSpec& spec);

struct LevelShare {
  std::string level;
  double proportion = 0.0;
  double weight = 0.0;
};

struct Distribution {
  std::string question_id;
  std::vector<LevelShare> shares;  // level order
  std::size_t n = 0;               // answered responses

  double proportion(std::string_view level) const;
};

/// `answers` holds a level index per response, nullopt when unanswered.
Distribution tally_distribution(std::string question_id, const std::vector<std::string>& levels,
                                std::span<const std::optional<std::size_t>> answers,
                                std::span<const double> weights = {});

/// Levels of a question as reported in tallies; expenditure deltas use the
/// five-point scale.
const std::vector<std::string>& tally_levels(const Question& question);
std::optional<std::size_t> tally_level_index(const ResponseRecord& record, const Question& question);

Distribution tally_question(std::span<const ResponseRecord> records, const Question& question,
                            std::span<const double> weights = {});

/// question_id, level, proportion, n
Table distributions_table(std::span<const Distribution> distributions);

struct PBTally {
  std::vector<std::string> project_ids;  // election order
  std::vector<std::size_t> approvals;
  std::vector<std::string> winners;  // selection order
  double spent = 0.0;
};

PBTally pb_knapsack_tally(const PBElectionLog& election);

struct Scenario {
  std::string id;
  std::vector<std::pair<std::string, int>> levels;  // question id -> code
};

struct ScenarioSet {
  std::vector<Scenario> scenarios;
  std::vector<std::string> retained;
  std::vector<std::string> dropped;

  Table to_table(const EncodingSchema& schema) const;
};

/// Label for a code of a question ("+3 increments" style for deltas).
std::string level_label(const Question& question, int code);

ScenarioSet scenarios_from_centroids(const ClusterModel& model, const EncodingSchema& schema);

}  // namespace pbf
