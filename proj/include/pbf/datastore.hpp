#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbf/ballot.hpp"
#include "pbf/cluster.hpp"
#include "pbf/pb_election.hpp"

namespace pbf {

enum class Provenance { raw, anonymized };

/// Append-only, validated sequence of responses under one budget spec.
class ResponseLog {
 public:
  explicit ResponseLog(BudgetSpec spec, Provenance provenance = Provenance::raw);

  const BudgetSpec& spec() const { return spec_; }
  Provenance provenance() const { return provenance_; }
  const std::vector<ResponseRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  /// Zero-based segment recorded with the response, if any.
  std::optional<std::size_t> segment(std::size_t i) const { return segments_.at(i); }
  bool has_segments() const;

  /// Throws DataError with the validation summary when the record is invalid,
  /// its id is already present, or an anonymized log gets a sub-day timestamp.
  void append(ResponseRecord record, std::optional<std::size_t> segment = std::nullopt);

 private:
  BudgetSpec spec_;
  Provenance provenance_;
  std::vector<ResponseRecord> records_;
  std::vector<std::optional<std::size_t>> segments_;
  std::map<std::string, std::size_t> ids_;
};

struct RejectedRow {
  std::size_t line = 0;  // 1-based line in the file
  std::string respondent_id;
  std::string reason;
};

struct LoadOptions {
  /// File column name -> canonical column name.
  std::map<std::string, std::string> header_map;
  double max_invalid_fraction = 0.10;
};

struct LoadResult {
  ResponseLog log;
  std::vector<RejectedRow> rejected;
};

/// Canonical columns: respondent_id, date, [segment], exp.<AREA> (change in
/// cents) or likert.<AREA> (-2..2), fee.<category> (0..2), property_tax
/// (-1..1), demo.<axis>. Empty cells are unanswered. Segments are 1-based in
/// files.
std::vector<std::string> canonical_columns(const BudgetSpec& spec, bool with_segment);

LoadResult read_responses(std::istream& in, const BudgetSpec& spec, const LoadOptions& options = {});
LoadResult load_responses(const std::filesystem::path& path, const BudgetSpec& spec, const LoadOptions& options = {});
void write_responses(std::ostream& out, const ResponseLog& log);
void save_responses(const std::filesystem::path& path, const ResponseLog& log);

/// Day-granular timestamps, seeded shuffle within each day, fresh opaque ids,
/// free-text demographics dropped.
ResponseLog anonymize(const ResponseLog& log, std::uint64_t seed);

/// Numeric encoding of every record that answers all schema questions.
struct EncodedResponses {
  RawMatrix matrix;
  std::vector<std::size_t> record_index;  // row -> index into the source records
  std::size_t skipped = 0;
};
EncodedResponses encode_responses(std::span<const ResponseRecord> records, const EncodingSchema& schema);

/// Header lines "# election: <id>", "# budget: <amount>", "# project: <id>,<cost>",
/// then a voter_id,project_id,amount,start,end table. A row with an empty
/// project id records an empty vote.
PBElectionLog read_pb_election(std::istream& in);
PBElectionLog load_pb_election(const std::filesystem::path& path);
void write_pb_election(std::ostream& out, const PBElectionLog& election);

struct CleanedElection {
  PBElectionLog election;
  std::size_t empty_removed = 0;
  std::size_t trimmed_per_side = 0;
  bool excluded = false;  // fewer than min_votes survived
};

/// Removes empty votes, then the floor(10%) fastest and slowest voters
/// (ties by voter id). Survivors keep arrival order.
CleanedElection clean_pb_election(const PBElectionLog& election, std::size_t min_votes = 100);

/// Allocated amount over project cost, one row per vote in arrival order.
FeatureMatrix pb_feature_vectors(const PBElectionLog& election);

}  // namespace pbf
