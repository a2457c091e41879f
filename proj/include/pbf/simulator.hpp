#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pbf/ballot.hpp"
#include "pbf/datastore.hpp"

namespace pbf {

struct ClusterProfile {
  double share = 0.0;
  std::map<std::string, double> mean;   // question id -> mean code (increments for deltas)
  std::map<std::string, double> noise;  // question id -> standard deviation
  double default_noise = 0.0;
  std::map<std::string, std::map<std::string, double>> demographics;  // axis -> category -> probability

  double noise_for(const std::string& question) const;
};

struct PopulationProfile {
  std::vector<ClusterProfile> clusters;

  std::vector<double> shares() const;
  /// Shares positive and summing to one; every schema question has a mean
  /// whose rounded value is legal. Throws std::invalid_argument.
  void check(const EncodingSchema& schema) const;
};

struct Shock {
  std::size_t day = 0;       // zero-based first day
  std::size_t duration = 0;  // days
  std::vector<double> multiplier;  // per cluster
};

struct TurnoutSchedule {
  std::size_t horizon_days = 0;
  std::optional<Day> start;       // defaults to the spec window start
  std::vector<double> base_rate;  // expected arrivals per day, per cluster
  std::optional<Shock> shock;

  double rate(std::size_t cluster, std::size_t day) const;
  void check(std::size_t clusters) const;
};

PopulationProfile profile_from_json(const nlohmann::json& doc);
/// base_rate may be given directly or as daily_total split by the profile shares.
TurnoutSchedule schedule_from_json(const nlohmann::json& doc, const PopulationProfile& profile);

struct Arrival {
  TimePoint at;
  std::size_t cluster = 0;
};

/// Poisson daily counts per cluster, uniform times within each day, sorted.
std::vector<Arrival> simulate_arrivals(const TurnoutSchedule& schedule, Day start, std::uint64_t seed);

struct SimulationResult {
  ResponseLog log;
  std::vector<std::size_t> labels;  // ground truth, aligned with log records
};

SimulationResult simulate(const PopulationProfile& profile, const TurnoutSchedule& schedule, const BudgetSpec& spec,
                          std::uint64_t seed);

/// Uniformly random order of a label multiset with counts rounded from
/// N * share by largest remainder.
std::vector<std::size_t> null_schedule(std::size_t N, std::span<const double> shares, std::uint64_t seed);

}  // namespace pbf
