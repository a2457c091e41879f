#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pbf/timeutil.hpp"

namespace pbf {

/// Currency is carried as integer cents so that balance checks are exact.
using Cents = std::int64_t;

/// Exact non-negative rational, used for the floor fraction.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  /// Rounds to the nearest multiple of 1e-9 and reduces.
  static Ratio from_double(double value);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct ServiceArea {
  std::string id;
  std::string name;
  Cents baseline = 0;
};

struct DemographicAxis {
  std::string id;
  std::vector<std::string> categories;
  bool free_text = false;  // dropped by anonymization, never validated
};

/// How the expenditure section is elicited: reallocation of a fixed total
/// (2020) or a five-point scale per area (2021).
enum class BallotMode { expenditure, likert };

struct ExerciseWindow {
  TimePoint start;
  TimePoint end;  // inclusive
};

inline constexpr std::string_view kUnanswered = "unanswered";

class BudgetSpec {
 public:
  BudgetSpec(std::vector<ServiceArea> areas, Cents increment, Ratio floor_fraction,
             std::vector<std::string> fee_categories = {}, std::vector<DemographicAxis> axes = {},
             BallotMode mode = BallotMode::expenditure, std::optional<ExerciseWindow> window = {});

  const std::vector<ServiceArea>& areas() const { return areas_; }
  Cents increment() const { return increment_; }
  const Ratio& floor_fraction() const { return floor_fraction_; }
  Cents total() const { return total_; }
  const std::vector<std::string>& fee_categories() const { return fee_categories_; }
  const std::vector<DemographicAxis>& demographic_axes() const { return axes_; }
  BallotMode mode() const { return mode_; }
  const std::optional<ExerciseWindow>& window() const { return window_; }

  /// Display name of a fee category; the id when none was declared.
  const std::string& fee_name(const std::string& id) const;
  BudgetSpec with_fee_names(std::map<std::string, std::string> names) const;

  std::optional<std::size_t> area_index(std::string_view id) const;
  const DemographicAxis* axis(std::string_view id) const;

  /// Smallest grid step count k with baseline + k*increment >= (1 - floor)*baseline.
  std::int64_t min_delta_steps(std::size_t area) const;
  /// allocation >= (1 - floor) * baseline, evaluated exactly on raw cents.
  bool above_floor(std::size_t area, Cents allocation) const;

 private:
  std::vector<ServiceArea> areas_;
  Cents increment_;
  Ratio floor_fraction_;
  Cents total_ = 0;
  std::vector<std::string> fee_categories_;
  std::vector<DemographicAxis> axes_;
  BallotMode mode_;
  std::optional<ExerciseWindow> window_;
  std::map<std::string, std::string> fee_names_;
};

enum class FeeLevel : int { no_change = 0, moderate_increase = 1, significant_increase = 2 };
enum class PropertyTax : int { oppose = -1, no_opinion = 0, support = 1 };
enum class LikertLevel : int {
  significant_decrease = -2,
  moderate_decrease = -1,
  no_change = 0,
  moderate_increase = 1,
  significant_increase = 2,
};

bool in_range(FeeLevel v);
bool in_range(PropertyTax v);
bool in_range(LikertLevel v);

const std::vector<std::string>& fee_level_labels();       // codes 0..2
const std::vector<std::string>& property_tax_labels();    // codes -1..1
const std::vector<std::string>& likert_level_labels();    // codes -2..2

/// Buckets a 2020 reallocation into the five-point reporting scale; a change of
/// 3% of baseline or more counts as significant.
LikertLevel expenditure_level(Cents delta, Cents baseline);

struct ExpenditureBallot {
  std::map<std::string, Cents> allocation;
};

struct RevenueBallot {
  PropertyTax property_tax = PropertyTax::no_opinion;
  std::map<std::string, FeeLevel> fee_level;
};

struct LikertBallot {
  std::map<std::string, LikertLevel> level;
};

struct ResponseRecord {
  std::string respondent_id;
  TimePoint timestamp;
  std::optional<std::variant<ExpenditureBallot, LikertBallot>> expenditure;
  std::optional<RevenueBallot> revenue;
  std::map<std::string, std::string> demographics;

  const ExpenditureBallot* expenditure_ballot() const;
  const LikertBallot* likert_ballot() const;
  /// Category for the axis, or kUnanswered.
  std::string_view demographic(std::string_view axis) const;
};

/// Consecutive intervals [start, cut1), [cut1, cut2), ..., [cutN, end].
class Segmentation {
 public:
  Segmentation(TimePoint start, std::vector<TimePoint> cuts, TimePoint end);
  std::size_t size() const { return cuts_.size() + 1; }
  TimePoint start() const { return start_; }
  TimePoint end() const { return end_; }
  const std::vector<TimePoint>& cuts() const { return cuts_; }

 private:
  TimePoint start_;
  std::vector<TimePoint> cuts_;
  TimePoint end_;
};

/// Zero-based segment index. Throws std::out_of_range outside the window.
std::size_t assign_segment(TimePoint timestamp, const Segmentation& segmentation);

enum class Constraint { balance, grid, floor, coverage };
std::string_view to_string(Constraint c);

struct Violation {
  Constraint constraint;
  std::optional<std::string> area_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  void merge(const ValidationReport& other);
  std::string summary() const;
};

ValidationReport validate_expenditure(const BudgetSpec& spec, const ExpenditureBallot& ballot);
ValidationReport validate_survey(const BudgetSpec& spec, const RevenueBallot& revenue,
                                 const LikertBallot* likert = nullptr);
ValidationReport validate_likert(const BudgetSpec& spec, const LikertBallot& likert);
/// Everything a stored record must satisfy: ballots, demographics, window.
ValidationReport validate_record(const BudgetSpec& spec, const ResponseRecord& record);

enum class QuestionKind { expenditure_delta, likert, fee, property_tax };

struct Question {
  std::string id;
  QuestionKind kind;
  std::string ref;  // area id or fee category id; empty for property tax
  int min_code = 0;
  int max_code = 0;  // unused for expenditure deltas, which are unbounded above
  std::vector<std::string> level_labels;
  Cents baseline = 0;
  Cents increment = 1;
};

/// Canonical question order used by the numeric encoding: expenditure areas in
/// spec order, then fee categories, then property tax.
class EncodingSchema {
 public:
  struct Sections {
    bool expenditure = true;
    bool revenue = true;
  };

  static EncodingSchema for_spec(const BudgetSpec& spec, Sections sections);
  static EncodingSchema for_spec(const BudgetSpec& spec) { return for_spec(spec, Sections{}); }

  const std::vector<Question>& questions() const { return questions_; }
  std::vector<std::string> ids() const;
  const Question* find(std::string_view id) const;

  explicit EncodingSchema(std::vector<Question> questions) : questions_(std::move(questions)) {}

 private:
  std::vector<Question> questions_;
};

class MissingAnswerError : public std::runtime_error {
 public:
  explicit MissingAnswerError(std::string question)
      : std::runtime_error("unanswered question '" + question + "'"), question_(std::move(question)) {}
  const std::string& question() const { return question_; }

 private:
  std::string question_;
};

/// Ordinal code of a single answer, or nullopt when unanswered.
std::optional<int> answer_code(const ResponseRecord& record, const Question& question);

/// Five-point levels map to -2..2, fee levels to 0..2, property tax to -1..1
/// and expenditure deltas to signed increments.
std::vector<double> encode_ordinal(const ResponseRecord& record, const EncodingSchema& schema);

}  // namespace pbf
