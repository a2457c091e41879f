#include "pbf/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pbf/table.hpp"

namespace pbf {

namespace {

std::int64_t parse_int(const std::string& cell, const std::string& column) {
  std::int64_t v = 0;
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError("column '" + column + "': '" + cell + "' is not an integer");
  }
  return v;
}

double parse_number(const std::string& cell, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (cell.empty() || used != cell.size() || !std::isfinite(v)) {
    throw DataError(what + ": '" + cell + "' is not a number");
  }
  return v;
}

std::string format_number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

bool all_empty(const std::vector<std::string>& row, const std::vector<std::size_t>& cols) {
  return std::all_of(cols.begin(), cols.end(), [&](std::size_t c) { return row[c].empty(); });
}

// Column positions of one file, resolved against the canonical names.
struct ColumnMap {
  std::size_t id = 0;
  std::size_t date = 0;
  std::optional<std::size_t> segment;
  std::vector<std::pair<std::size_t, std::size_t>> areas;  // column, area index
  std::vector<std::pair<std::size_t, std::string>> fees;
  std::optional<std::size_t> property_tax;
  std::vector<std::pair<std::size_t, std::string>> demo;
  std::size_t width = 0;
};

ColumnMap resolve_header(const std::vector<std::string>& raw, const BudgetSpec& spec, const LoadOptions& options) {
  const auto canonical = canonical_columns(spec, true);
  const std::set<std::string> known(canonical.begin(), canonical.end());
  ColumnMap m;
  m.width = raw.size();
  std::set<std::string> seen;
  bool has_id = false;
  bool has_date = false;
  const std::string area_prefix = spec.mode() == BallotMode::expenditure ? "exp." : "likert.";
  for (std::size_t c = 0; c < raw.size(); ++c) {
    std::string name = raw[c];
    if (auto it = options.header_map.find(name); it != options.header_map.end()) {
      name = it->second;
    }
    if (!known.count(name)) {
      throw DataError("malformed header: unknown column '" + raw[c] + "'");
    }
    if (!seen.insert(name).second) {
      throw DataError("malformed header: duplicate column '" + name + "'");
    }
    if (name == "respondent_id") {
      m.id = c;
      has_id = true;
    } else if (name == "date") {
      m.date = c;
      has_date = true;
    } else if (name == "segment") {
      m.segment = c;
    } else if (name == "property_tax") {
      m.property_tax = c;
    } else if (name.starts_with(area_prefix)) {
      m.areas.emplace_back(c, *spec.area_index(name.substr(area_prefix.size())));
    } else if (name.starts_with("fee.")) {
      m.fees.emplace_back(c, name.substr(4));
    } else if (name.starts_with("demo.")) {
      m.demo.emplace_back(c, name.substr(5));
    }
  }
  if (!has_id || !has_date) {
    throw DataError("malformed header: respondent_id and date columns are required");
  }
  return m;
}

struct ParsedRow {
  ResponseRecord record;
  std::optional<std::size_t> segment;
  bool date_only = false;
};

ParsedRow parse_row(const std::vector<std::string>& row, const ColumnMap& m, const BudgetSpec& spec) {
  ParsedRow out;
  ResponseRecord& r = out.record;
  r.respondent_id = row[m.id];
  if (r.respondent_id.empty()) {
    throw DataError("empty respondent_id");
  }
  try {
    r.timestamp = parse_timestamp(row[m.date]);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad date: ") + e.what());
  }
  out.date_only = is_date_only(row[m.date]);
  if (m.segment && !row[*m.segment].empty()) {
    const auto s = parse_int(row[*m.segment], "segment");
    if (s < 1) {
      throw DataError("segment labels start at 1");
    }
    out.segment = static_cast<std::size_t>(s - 1);
  }

  std::vector<std::size_t> area_cols;
  for (const auto& [c, a] : m.areas) {
    area_cols.push_back(c);
  }
  if (!all_empty(row, area_cols)) {
    if (spec.mode() == BallotMode::expenditure) {
      ExpenditureBallot b;
      for (const auto& [c, a] : m.areas) {
        if (!row[c].empty()) {
          const auto& area = spec.areas()[a];
          b.allocation[area.id] = area.baseline + parse_int(row[c], "exp." + area.id);
        }
      }
      r.expenditure = b;
    } else {
      LikertBallot b;
      for (const auto& [c, a] : m.areas) {
        if (!row[c].empty()) {
          const auto& area = spec.areas()[a];
          b.level[area.id] = static_cast<LikertLevel>(parse_int(row[c], "likert." + area.id));
        }
      }
      r.expenditure = b;
    }
  }

  std::vector<std::size_t> revenue_cols;
  for (const auto& [c, id] : m.fees) {
    revenue_cols.push_back(c);
  }
  if (m.property_tax) {
    revenue_cols.push_back(*m.property_tax);
  }
  if (!all_empty(row, revenue_cols)) {
    if (!m.property_tax || row[*m.property_tax].empty()) {
      throw DataError("revenue section without a property tax answer");
    }
    RevenueBallot rev;
    rev.property_tax = static_cast<PropertyTax>(parse_int(row[*m.property_tax], "property_tax"));
    for (const auto& [c, id] : m.fees) {
      if (!row[c].empty()) {
        rev.fee_level[id] = static_cast<FeeLevel>(parse_int(row[c], "fee." + id));
      }
    }
    r.revenue = rev;
  }

  for (const auto& [c, axis] : m.demo) {
    if (!row[c].empty()) {
      r.demographics[axis] = row[c];
    }
  }
  const auto report = validate_record(spec, r);
  if (!report.valid()) {
    throw DataError(report.summary());
  }
  return out;
}

}  // namespace

ResponseLog::ResponseLog(BudgetSpec spec, Provenance provenance) : spec_(std::move(spec)), provenance_(provenance) {}

bool ResponseLog::has_segments() const {
  return std::any_of(segments_.begin(), segments_.end(), [](const auto& s) { return s.has_value(); });
}

void ResponseLog::append(ResponseRecord record, std::optional<std::size_t> segment) {
  const auto report = validate_record(spec_, record);
  if (!report.valid()) {
    throw DataError("response '" + record.respondent_id + "': " + report.summary());
  }
  if (ids_.count(record.respondent_id)) {
    throw DataError("duplicate respondent id '" + record.respondent_id + "'");
  }
  if (provenance_ == Provenance::anonymized && record.timestamp != TimePoint{day_of(record.timestamp)}) {
    throw DataError("anonymized logs hold day-granular timestamps only");
  }
  ids_.emplace(record.respondent_id, records_.size());
  records_.push_back(std::move(record));
  segments_.push_back(segment);
}

std::vector<std::string> canonical_columns(const BudgetSpec& spec, bool with_segment) {
  std::vector<std::string> cols{"respondent_id", "date"};
  if (with_segment) {
    cols.emplace_back("segment");
  }
  const std::string prefix = spec.mode() == BallotMode::expenditure ? "exp." : "likert.";
  for (const auto& a : spec.areas()) {
    cols.push_back(prefix + a.id);
  }
  for (const auto& f : spec.fee_categories()) {
    cols.push_back("fee." + f);
  }
  cols.emplace_back("property_tax");
  for (const auto& axis : spec.demographic_axes()) {
    cols.push_back("demo." + axis.id);
  }
  return cols;
}

LoadResult read_responses(std::istream& in, const BudgetSpec& spec, const LoadOptions& options) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<ColumnMap> cols;
  while (!cols && std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') {
      continue;
    }
    cols = resolve_header(split_csv_line(line), spec, options);
  }
  if (!cols) {
    throw DataError("malformed header: response file is empty");
  }

  std::vector<ParsedRow> parsed;
  std::vector<std::size_t> lines;
  std::vector<RejectedRow> rejected;
  std::set<std::string> ids;
  std::size_t total = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") {
      continue;
    }
    ++total;
    const auto row = split_csv_line(line);
    const std::string id = row.empty() ? std::string() : row[std::min(cols->id, row.size() - 1)];
    if (row.size() != cols->width) {
      rejected.push_back({lineno, id, "expected " + std::to_string(cols->width) + " fields, got " +
                                          std::to_string(row.size())});
      continue;
    }
    try {
      auto p = parse_row(row, *cols, spec);
      if (!ids.insert(p.record.respondent_id).second) {
        throw DataError("duplicate respondent id");
      }
      parsed.push_back(std::move(p));
      lines.push_back(lineno);
    } catch (const DataError& e) {
      rejected.push_back({lineno, row[cols->id], e.what()});
    }
  }
  if (total > 0 && static_cast<double>(rejected.size()) > options.max_invalid_fraction * static_cast<double>(total)) {
    const auto& first = rejected.front();
    throw DataError(std::to_string(rejected.size()) + " of " + std::to_string(total) +
                    " rows are invalid (likely a schema mismatch); first at line " + std::to_string(first.line) +
                    ": " + first.reason);
  }
  const bool anonymized =
      !parsed.empty() && std::all_of(parsed.begin(), parsed.end(), [](const ParsedRow& p) { return p.date_only; });
  LoadResult result{ResponseLog(spec, anonymized ? Provenance::anonymized : Provenance::raw), std::move(rejected)};
  for (auto& p : parsed) {
    result.log.append(std::move(p.record), p.segment);
  }
  return result;
}

LoadResult load_responses(const std::filesystem::path& path, const BudgetSpec& spec, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  return read_responses(in, spec, options);
}

void write_responses(std::ostream& out, const ResponseLog& log) {
  const auto& spec = log.spec();
  const bool seg = log.has_segments();
  out << join_csv_line(canonical_columns(spec, seg)) << '\n';
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log.records()[i];
    std::vector<std::string> row{r.respondent_id, log.provenance() == Provenance::anonymized
                                                      ? format_date(day_of(r.timestamp))
                                                      : format_timestamp(r.timestamp)};
    if (seg) {
      const auto s = log.segment(i);
      row.push_back(s ? std::to_string(*s + 1) : std::string());
    }
    const auto* exp = r.expenditure_ballot();
    const auto* lik = r.likert_ballot();
    for (const auto& a : spec.areas()) {
      if (exp) {
        row.push_back(std::to_string(exp->allocation.at(a.id) - a.baseline));
      } else if (lik) {
        row.push_back(std::to_string(static_cast<int>(lik->level.at(a.id))));
      } else {
        row.emplace_back();
      }
    }
    for (const auto& f : spec.fee_categories()) {
      row.push_back(r.revenue ? std::to_string(static_cast<int>(r.revenue->fee_level.at(f))) : std::string());
    }
    row.push_back(r.revenue ? std::to_string(static_cast<int>(r.revenue->property_tax)) : std::string());
    for (const auto& axis : spec.demographic_axes()) {
      auto it = r.demographics.find(axis.id);
      row.push_back(it == r.demographics.end() ? std::string() : it->second);
    }
    out << join_csv_line(row) << '\n';
  }
}

void save_responses(const std::filesystem::path& path, const ResponseLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  write_responses(out, log);
}

ResponseLog anonymize(const ResponseLog& log, std::uint64_t seed) {
  std::vector<std::size_t> order(log.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& recs = log.records();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return day_of(recs[a].timestamp) < day_of(recs[b].timestamp); });
  auto shuffle_rng = seeded(seed, 1);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && day_of(recs[order[j]].timestamp) == day_of(recs[order[i]].timestamp)) {
      ++j;
    }
    std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(j),
                 shuffle_rng);
    i = j;
  }

  auto token_rng = seeded(seed, 2);
  std::set<std::string> used;
  auto token = [&] {
    for (;;) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(token_rng()));
      if (used.insert(buf).second) {
        return std::string(buf);
      }
    }
  };

  ResponseLog out(log.spec(), Provenance::anonymized);
  for (std::size_t i : order) {
    ResponseRecord r = recs[i];
    r.respondent_id = token();
    r.timestamp = TimePoint{day_of(r.timestamp)};
    std::erase_if(r.demographics, [&](const auto& kv) {
      const auto* axis = log.spec().axis(kv.first);
      return axis && axis->free_text;
    });
    out.append(std::move(r), log.segment(i));
  }
  return out;
}

EncodedResponses encode_responses(std::span<const ResponseRecord> records, const EncodingSchema& schema) {
  EncodedResponses out;
  out.matrix.col_ids = schema.ids();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      rows.push_back(encode_ordinal(records[i], schema));
    } catch (const MissingAnswerError&) {
      ++out.skipped;
      continue;
    }
    out.matrix.row_ids.push_back(records[i].respondent_id);
    out.record_index.push_back(i);
  }
  out.matrix.values = rows.empty() ? Matrix(0, out.matrix.col_ids.size()) : Matrix::from_rows(rows);
  return out;
}

PBElectionLog read_pb_election(std::istream& in) {
  PBElectionLog e;
  bool have_budget = false;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    if (line[0] != '#') {
      header = split_csv_line(line);
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      continue;
    }
    std::string key = line.substr(1, colon - 1);
    std::string value = line.substr(colon + 1);
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
    };
    trim(key);
    trim(value);
    if (key == "election") {
      e.election_id = value;
    } else if (key == "budget") {
      e.budget = parse_number(value, "budget");
      have_budget = true;
    } else if (key == "project") {
      const auto f = split_csv_line(value);
      if (f.size() != 2 || f[0].empty()) {
        throw DataError("line " + std::to_string(lineno) + ": project needs id,cost");
      }
      if (e.project(f[0])) {
        throw DataError("duplicate project '" + f[0] + "'");
      }
      e.projects.push_back({f[0], parse_number(f[1], "cost of project '" + f[0] + "'")});
    }
  }
  if (e.election_id.empty() || !have_budget) {
    throw DataError("PB election file needs election and budget header lines");
  }
  if (header != std::vector<std::string>{"voter_id", "project_id", "amount", "start", "end"}) {
    throw DataError("PB election file: expected columns voter_id,project_id,amount,start,end");
  }
  std::map<std::string, std::size_t> slot;
  auto stamp = [&](const std::string& s) -> std::optional<TimePoint> {
    if (s.empty()) {
      return std::nullopt;
    }
    try {
      return parse_timestamp(s);
    } catch (const std::invalid_argument& ex) {
      throw DataError("line " + std::to_string(lineno) + ": " + ex.what());
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 5 || f[0].empty()) {
      throw DataError("line " + std::to_string(lineno) + ": expected voter_id,project_id,amount,start,end");
    }
    auto [it, fresh] = slot.emplace(f[0], e.votes.size());
    if (fresh) {
      PBVote v;
      v.voter_id = f[0];
      v.arrival_index = e.votes.size();
      e.votes.push_back(std::move(v));
    }
    PBVote& v = e.votes[it->second];
    if (!v.start) {
      v.start = stamp(f[3]);
    }
    if (!v.end) {
      v.end = stamp(f[4]);
    }
    if (f[1].empty()) {
      continue;
    }
    const PBProject* p = e.project(f[1]);
    if (!p) {
      throw DataError("line " + std::to_string(lineno) + ": unknown project '" + f[1] + "'");
    }
    const double amount = parse_number(f[2], "line " + std::to_string(lineno) + " amount");
    if (amount < 0.0 || amount > p->cost) {
      throw DataError("line " + std::to_string(lineno) + ": amount outside [0, cost] for project '" + f[1] + "'");
    }
    v.allocation[f[1]] += amount;
  }
  for (const auto& v : e.votes) {
    double total = 0.0;
    for (const auto& [id, a] : v.allocation) {
      total += a;
    }
    if (total > e.budget + 1e-9) {
      throw DataError("vote of '" + v.voter_id + "' exceeds the budget");
    }
  }
  return e;
}

PBElectionLog load_pb_election(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  return read_pb_election(in);
}

void write_pb_election(std::ostream& out, const PBElectionLog& e) {
  out << "# election: " << e.election_id << '\n';
  out << "# budget: " << format_number(e.budget) << '\n';
  for (const auto& p : e.projects) {
    out << "# project: " << join_csv_line({p.id, format_number(p.cost)}) << '\n';
  }
  out << "voter_id,project_id,amount,start,end\n";
  for (const auto& v : e.votes) {
    const std::string start = v.start ? format_timestamp(*v.start) : std::string();
    const std::string end = v.end ? format_timestamp(*v.end) : std::string();
    bool wrote = false;
    for (const auto& p : e.projects) {
      auto it = v.allocation.find(p.id);
      if (it != v.allocation.end() && it->second > 0.0) {
        out << join_csv_line({v.voter_id, p.id, format_number(it->second), start, end}) << '\n';
        wrote = true;
      }
    }
    if (!wrote) {
      out << join_csv_line({v.voter_id, "", "", start, end}) << '\n';
    }
  }
}

CleanedElection clean_pb_election(const PBElectionLog& election, std::size_t min_votes) {
  CleanedElection out;
  std::vector<const PBVote*> kept;
  for (const auto& v : election.votes) {
    if (v.empty()) {
      ++out.empty_removed;
    } else {
      if (!v.duration_seconds()) {
        throw DataError("vote of '" + v.voter_id + "' has no start/end times");
      }
      kept.push_back(&v);
    }
  }
  if (kept.empty()) {
    throw DataError("election '" + election.election_id + "' has no non-empty votes");
  }
  const std::size_t trim = kept.size() / 10;
  std::vector<std::size_t> by_speed(kept.size());
  std::iota(by_speed.begin(), by_speed.end(), std::size_t{0});
  std::sort(by_speed.begin(), by_speed.end(), [&](std::size_t a, std::size_t b) {
    const double da = *kept[a]->duration_seconds();
    const double db = *kept[b]->duration_seconds();
    return da != db ? da < db : kept[a]->voter_id < kept[b]->voter_id;
  });
  std::vector<bool> drop(kept.size(), false);
  for (std::size_t i = 0; i < trim; ++i) {
    drop[by_speed[i]] = true;
    drop[by_speed[kept.size() - 1 - i]] = true;
  }
  out.trimmed_per_side = trim;
  out.election.election_id = election.election_id;
  out.election.budget = election.budget;
  out.election.projects = election.projects;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!drop[i]) {
      out.election.votes.push_back(*kept[i]);
    }
  }
  out.excluded = out.election.votes.size() < min_votes;
  return out;
}

FeatureMatrix pb_feature_vectors(const PBElectionLog& election) {
  for (const auto& p : election.projects) {
    if (!(p.cost > 0.0)) {
      throw DataError("project '" + p.id + "' has zero cost");
    }
  }
  RawMatrix raw;
  raw.values = Matrix(election.votes.size(), election.projects.size());
  for (const auto& p : election.projects) {
    raw.col_ids.push_back(p.id);
  }
  for (std::size_t i = 0; i < election.votes.size(); ++i) {
    const auto& v = election.votes[i];
    raw.row_ids.push_back(v.voter_id);
    for (const auto& [id, amount] : v.allocation) {
      const auto it = std::find_if(election.projects.begin(), election.projects.end(),
                                   [&](const PBProject& p) { return p.id == id; });
      if (it == election.projects.end()) {
        throw DataError("vote of '" + v.voter_id + "' names unknown project '" + id + "'");
      }
      const double share = amount / it->cost;
      if (share < 0.0 || share > 1.0) {
        throw DataError("vote of '" + v.voter_id + "' allocates outside [0, cost] to '" + id + "'");
      }
      raw.values(i, static_cast<std::size_t>(it - election.projects.begin())) = share;
    }
  }
  return identity_features(raw);
}

}  // namespace pbf
