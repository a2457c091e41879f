#include "pbf/pb_election.hpp"

#include <chrono>

namespace pbf {

bool PBVote::empty() const {
  for (const auto& [id, amount] : allocation) {
    if (amount > 0.0) {
      return false;
    }
  }
  return true;
}

std::optional<double> PBVote::duration_seconds() const {
  if (!start || !end) {
    return std::nullopt;
  }
  return std::chrono::duration<double>(*end - *start).count();
}

const PBProject* PBElectionLog::project(const std::string& id) const {
  for (const auto& p : projects) {
    if (p.id == id) {
      return &p;
    }
  }
  return nullptr;
}

}  // namespace pbf
