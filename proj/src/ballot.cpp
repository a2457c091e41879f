#include "pbf/ballot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace pbf {

__extension__ typedef __int128 i128;

Ratio Ratio::from_double(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("ratio must be finite and non-negative");
  }
  constexpr std::int64_t kDen = 1'000'000'000;
  const auto num = static_cast<std::int64_t>(std::llround(value * static_cast<double>(kDen)));
  const auto g = std::gcd(num, kDen);
  return Ratio{num / g, kDen / g};
}

BudgetSpec::BudgetSpec(std::vector<ServiceArea> areas, Cents increment, Ratio floor_fraction,
                       std::vector<std::string> fee_categories, std::vector<DemographicAxis> axes,
                       BallotMode mode, std::optional<ExerciseWindow> window)
    : areas_(std::move(areas)),
      increment_(increment),
      floor_fraction_(floor_fraction),
      fee_categories_(std::move(fee_categories)),
      axes_(std::move(axes)),
      mode_(mode),
      window_(window) {
  if (areas_.empty()) {
    throw std::invalid_argument("budget spec needs at least one service area");
  }
  if (increment_ <= 0) {
    throw std::invalid_argument("increment must be positive");
  }
  if (floor_fraction_.den <= 0 || floor_fraction_.num < 0 || floor_fraction_.num > floor_fraction_.den) {
    throw std::invalid_argument("floor fraction must lie in [0, 1]");
  }
  std::set<std::string, std::less<>> ids;
  for (const auto& area : areas_) {
    if (area.baseline < 0) {
      throw std::invalid_argument("negative baseline for area '" + area.id + "'");
    }
    if (area.id.empty() || !ids.insert(area.id).second) {
      throw std::invalid_argument("duplicate or empty area id '" + area.id + "'");
    }
    total_ += area.baseline;
  }
  std::set<std::string, std::less<>> fees(fee_categories_.begin(), fee_categories_.end());
  if (fees.size() != fee_categories_.size()) {
    throw std::invalid_argument("duplicate fee category");
  }
  std::set<std::string, std::less<>> axis_ids;
  for (const auto& axis : axes_) {
    if (!axis_ids.insert(axis.id).second) {
      throw std::invalid_argument("duplicate demographic axis '" + axis.id + "'");
    }
    for (const auto& c : axis.categories) {
      if (c == kUnanswered) {
        throw std::invalid_argument("'unanswered' is reserved on axis '" + axis.id + "'");
      }
    }
  }
  if (window_ && window_->end < window_->start) {
    throw std::invalid_argument("exercise window ends before it starts");
  }
}

const std::string& BudgetSpec::fee_name(const std::string& id) const {
  auto it = fee_names_.find(id);
  return it == fee_names_.end() ? id : it->second;
}

BudgetSpec BudgetSpec::with_fee_names(std::map<std::string, std::string> names) const {
  BudgetSpec copy = *this;
  copy.fee_names_ = std::move(names);
  return copy;
}

std::optional<std::size_t> BudgetSpec::area_index(std::string_view id) const {
  for (std::size_t i = 0; i < areas_.size(); ++i) {
    if (areas_[i].id == id) {
      return i;
    }
  }
  return std::nullopt;
}

const DemographicAxis* BudgetSpec::axis(std::string_view id) const {
  for (const auto& a : axes_) {
    if (a.id == id) {
      return &a;
    }
  }
  return nullptr;
}

bool BudgetSpec::above_floor(std::size_t area, Cents allocation) const {
  const auto& f = floor_fraction_;
  return static_cast<i128>(allocation) * f.den >= static_cast<i128>(f.den - f.num) * areas_.at(area).baseline;
}

std::int64_t BudgetSpec::min_delta_steps(std::size_t area) const {
  // k * inc * den >= -num * baseline  =>  k >= ceil(-num * baseline / (inc * den))
  const auto& f = floor_fraction_;
  const i128 rhs = -static_cast<i128>(f.num) * areas_.at(area).baseline;
  const i128 div = static_cast<i128>(increment_) * f.den;
  i128 q = rhs / div;
  if (q * div < rhs) {
    ++q;
  }
  return static_cast<std::int64_t>(q);
}

bool in_range(FeeLevel v) {
  const int c = static_cast<int>(v);
  return c >= 0 && c <= 2;
}
bool in_range(PropertyTax v) {
  const int c = static_cast<int>(v);
  return c >= -1 && c <= 1;
}
bool in_range(LikertLevel v) {
  const int c = static_cast<int>(v);
  return c >= -2 && c <= 2;
}

const std::vector<std::string>& fee_level_labels() {
  static const std::vector<std::string> labels{"no-change", "moderate-increase", "significant-increase"};
  return labels;
}
const std::vector<std::string>& property_tax_labels() {
  static const std::vector<std::string> labels{"oppose", "no-opinion", "support"};
  return labels;
}
const std::vector<std::string>& likert_level_labels() {
  static const std::vector<std::string> labels{"significant-decrease", "moderate-decrease", "no-change",
                                               "moderate-increase", "significant-increase"};
  return labels;
}

LikertLevel expenditure_level(Cents delta, Cents baseline) {
  if (delta == 0) {
    return LikertLevel::no_change;
  }
  // |delta| >= 0.03 * baseline, exactly
  const bool significant = static_cast<i128>(delta < 0 ? -delta : delta) * 100 >= static_cast<i128>(baseline) * 3;
  if (delta < 0) {
    return significant ? LikertLevel::significant_decrease : LikertLevel::moderate_decrease;
  }
  return significant ? LikertLevel::significant_increase : LikertLevel::moderate_increase;
}

const ExpenditureBallot* ResponseRecord::expenditure_ballot() const {
  return expenditure ? std::get_if<ExpenditureBallot>(&*expenditure) : nullptr;
}

const LikertBallot* ResponseRecord::likert_ballot() const {
  return expenditure ? std::get_if<LikertBallot>(&*expenditure) : nullptr;
}

std::string_view ResponseRecord::demographic(std::string_view axis) const {
  auto it = demographics.find(std::string(axis));
  return it == demographics.end() ? kUnanswered : std::string_view(it->second);
}

Segmentation::Segmentation(TimePoint start, std::vector<TimePoint> cuts, TimePoint end)
    : start_(start), cuts_(std::move(cuts)), end_(end) {
  TimePoint prev = start_;
  for (const auto& c : cuts_) {
    if (!(prev < c)) {
      throw std::invalid_argument("segment boundaries must be strictly increasing");
    }
    prev = c;
  }
  if (!(prev < end_)) {
    throw std::invalid_argument("segment boundaries must be strictly increasing");
  }
}

std::size_t assign_segment(TimePoint timestamp, const Segmentation& segmentation) {
  if (timestamp < segmentation.start() || timestamp > segmentation.end()) {
    throw std::out_of_range("timestamp " + format_timestamp(timestamp) + " outside the segmentation window");
  }
  const auto& cuts = segmentation.cuts();
  return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), timestamp) - cuts.begin());
}

std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::balance:
      return "balance";
    case Constraint::grid:
      return "grid";
    case Constraint::floor:
      return "floor";
    case Constraint::coverage:
      return "coverage";
  }
  return "unknown";
}

void ValidationReport::merge(const ValidationReport& other) {
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    const auto& v = violations[i];
    if (i) {
      out << "; ";
    }
    out << to_string(v.constraint);
    if (v.area_id) {
      out << "[" << *v.area_id << "]";
    }
    out << ": " << v.detail;
  }
  return out.str();
}

ValidationReport validate_expenditure(const BudgetSpec& spec, const ExpenditureBallot& ballot) {
  ValidationReport report;
  for (const auto& [id, amount] : ballot.allocation) {
    if (!spec.area_index(id)) {
      report.violations.push_back({Constraint::coverage, id, "unknown service area"});
    }
  }
  Cents sum = 0;
  for (std::size_t i = 0; i < spec.areas().size(); ++i) {
    const auto& area = spec.areas()[i];
    auto it = ballot.allocation.find(area.id);
    if (it == ballot.allocation.end()) {
      report.violations.push_back({Constraint::coverage, area.id, "missing allocation"});
      continue;
    }
    const Cents amount = it->second;
    sum += amount;
    if ((amount - area.baseline) % spec.increment() != 0) {
      report.violations.push_back(
          {Constraint::grid, area.id, "change of " + std::to_string(amount - area.baseline) + " cents is off the increment grid"});
    }
    if (!spec.above_floor(i, amount)) {
      report.violations.push_back({Constraint::floor, area.id, "allocation below the floor"});
    }
  }
  if (sum != spec.total()) {
    report.violations.push_back({Constraint::balance, std::nullopt,
                                 "allocations sum to " + std::to_string(sum) + " cents, expected " +
                                     std::to_string(spec.total())});
  }
  return report;
}

ValidationReport validate_likert(const BudgetSpec& spec, const LikertBallot& likert) {
  ValidationReport report;
  for (const auto& [id, level] : likert.level) {
    if (!spec.area_index(id)) {
      report.violations.push_back({Constraint::coverage, id, "unknown service area"});
    } else if (!in_range(level)) {
      report.violations.push_back(
          {Constraint::coverage, id, "level code " + std::to_string(static_cast<int>(level)) + " outside the five-point scale"});
    }
  }
  for (const auto& area : spec.areas()) {
    if (!likert.level.count(area.id)) {
      report.violations.push_back({Constraint::coverage, area.id, "missing five-point answer"});
    }
  }
  return report;
}

ValidationReport validate_survey(const BudgetSpec& spec, const RevenueBallot& revenue, const LikertBallot* likert) {
  ValidationReport report;
  if (!in_range(revenue.property_tax)) {
    report.violations.push_back({Constraint::coverage, std::string("property_tax"), "property tax answer out of range"});
  }
  const auto& cats = spec.fee_categories();
  for (const auto& [cat, level] : revenue.fee_level) {
    if (std::find(cats.begin(), cats.end(), cat) == cats.end()) {
      report.violations.push_back({Constraint::coverage, cat, "unknown fee category"});
    } else if (!in_range(level)) {
      report.violations.push_back(
          {Constraint::coverage, cat, "fee level code " + std::to_string(static_cast<int>(level)) + " out of range"});
    }
  }
  for (const auto& cat : cats) {
    if (!revenue.fee_level.count(cat)) {
      report.violations.push_back({Constraint::coverage, cat, "missing fee answer"});
    }
  }
  if (likert) {
    report.merge(validate_likert(spec, *likert));
  }
  return report;
}

ValidationReport validate_record(const BudgetSpec& spec, const ResponseRecord& record) {
  ValidationReport report;
  if (const auto* exp = record.expenditure_ballot()) {
    report.merge(validate_expenditure(spec, *exp));
  }
  if (const auto* lik = record.likert_ballot()) {
    report.merge(validate_likert(spec, *lik));
  }
  if (record.revenue) {
    report.merge(validate_survey(spec, *record.revenue));
  }
  for (const auto& [axis_id, value] : record.demographics) {
    const auto* axis = spec.axis(axis_id);
    if (!axis) {
      report.violations.push_back({Constraint::coverage, axis_id, "unknown demographic axis"});
      continue;
    }
    if (axis->free_text || value == kUnanswered) {
      continue;
    }
    if (std::find(axis->categories.begin(), axis->categories.end(), value) == axis->categories.end()) {
      report.violations.push_back({Constraint::coverage, axis_id, "unknown category '" + value + "'"});
    }
  }
  if (const auto& w = spec.window()) {
    if (record.timestamp < w->start || record.timestamp > w->end) {
      report.violations.push_back(
          {Constraint::coverage, std::nullopt, "timestamp " + format_timestamp(record.timestamp) + " outside the exercise window"});
    }
  }
  return report;
}

EncodingSchema EncodingSchema::for_spec(const BudgetSpec& spec, Sections sections) {
  std::vector<Question> qs;
  if (sections.expenditure) {
    for (std::size_t i = 0; i < spec.areas().size(); ++i) {
      const auto& area = spec.areas()[i];
      Question q;
      q.ref = area.id;
      if (spec.mode() == BallotMode::expenditure) {
        q.id = "exp." + area.id;
        q.kind = QuestionKind::expenditure_delta;
        q.min_code = static_cast<int>(spec.min_delta_steps(i));
        q.baseline = area.baseline;
        q.increment = spec.increment();
      } else {
        q.id = "likert." + area.id;
        q.kind = QuestionKind::likert;
        q.min_code = -2;
        q.max_code = 2;
        q.level_labels = likert_level_labels();
      }
      qs.push_back(std::move(q));
    }
  }
  if (sections.revenue) {
    for (const auto& cat : spec.fee_categories()) {
      qs.push_back(Question{"fee." + cat, QuestionKind::fee, cat, 0, 2, fee_level_labels()});
    }
    qs.push_back(Question{"property_tax", QuestionKind::property_tax, "", -1, 1, property_tax_labels()});
  }
  return EncodingSchema(std::move(qs));
}

std::vector<std::string> EncodingSchema::ids() const {
  std::vector<std::string> out;
  out.reserve(questions_.size());
  for (const auto& q : questions_) {
    out.push_back(q.id);
  }
  return out;
}

const Question* EncodingSchema::find(std::string_view id) const {
  for (const auto& q : questions_) {
    if (q.id == id) {
      return &q;
    }
  }
  return nullptr;
}

std::optional<int> answer_code(const ResponseRecord& record, const Question& q) {
  switch (q.kind) {
    case QuestionKind::expenditure_delta: {
      const auto* b = record.expenditure_ballot();
      if (!b) {
        return std::nullopt;
      }
      auto it = b->allocation.find(q.ref);
      if (it == b->allocation.end()) {
        return std::nullopt;
      }
      const Cents delta = it->second - q.baseline;
      if (delta % q.increment != 0) {
        throw std::invalid_argument("expenditure change for '" + q.ref + "' is off the increment grid");
      }
      return static_cast<int>(delta / q.increment);
    }
    case QuestionKind::likert: {
      const auto* b = record.likert_ballot();
      if (!b) {
        return std::nullopt;
      }
      auto it = b->level.find(q.ref);
      if (it == b->level.end()) {
        return std::nullopt;
      }
      return static_cast<int>(it->second);
    }
    case QuestionKind::fee: {
      if (!record.revenue) {
        return std::nullopt;
      }
      auto it = record.revenue->fee_level.find(q.ref);
      if (it == record.revenue->fee_level.end()) {
        return std::nullopt;
      }
      return static_cast<int>(it->second);
    }
    case QuestionKind::property_tax:
      if (!record.revenue) {
        return std::nullopt;
      }
      return static_cast<int>(record.revenue->property_tax);
  }
  return std::nullopt;
}

std::vector<double> encode_ordinal(const ResponseRecord& record, const EncodingSchema& schema) {
  std::vector<double> out;
  out.reserve(schema.questions().size());
  for (const auto& q : schema.questions()) {
    const auto code = answer_code(record, q);
    if (!code) {
      throw MissingAnswerError(q.id);
    }
    out.push_back(static_cast<double>(*code));
  }
  return out;
}

}  // namespace pbf
