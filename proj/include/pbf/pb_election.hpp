#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pbf/timeutil.hpp"

namespace pbf {

struct PBProject {
  std::string id;
  double cost = 0.0;
};

struct PBVote {
  std::string voter_id;
  std::map<std::string, double> allocation;  // project id -> amount; approval means amount > 0
  std::optional<TimePoint> start;
  std::optional<TimePoint> end;
  std::size_t arrival_index = 0;

  bool empty() const;
  std::optional<double> duration_seconds() const;
};

/// One participatory-budgeting election from the public knapsack-vote logs.
struct PBElectionLog {
  std::string election_id;
  double budget = 0.0;
  std::vector<PBProject> projects;
  std::vector<PBVote> votes;  // arrival order

  const PBProject* project(const std::string& id) const;
};

}  // namespace pbf
