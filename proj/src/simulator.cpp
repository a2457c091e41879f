#include "pbf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pbf/aggregate.hpp"

namespace pbf {

using nlohmann::json;

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::string padded_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "sim-" + std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

}  // namespace

double ClusterProfile::noise_for(const std::string& question) const {
  auto it = noise.find(question);
  return it == noise.end() ? default_noise : it->second;
}

std::vector<double> PopulationProfile::shares() const {
  std::vector<double> s;
  for (const auto& c : clusters) {
    s.push_back(c.share);
  }
  return s;
}

void PopulationProfile::check(const EncodingSchema& schema) const {
  if (clusters.empty()) {
    throw std::invalid_argument("profile has no clusters");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& cl = clusters[c];
    if (!(cl.share > 0.0)) {
      throw std::invalid_argument("cluster " + std::to_string(c) + " share must be positive");
    }
    total += cl.share;
    for (const auto& q : schema.questions()) {
      auto it = cl.mean.find(q.id);
      if (it == cl.mean.end()) {
        throw std::invalid_argument("cluster " + std::to_string(c) + " has no mean for '" + q.id + "'");
      }
      if (q.kind != QuestionKind::expenditure_delta) {
        const int code = round_half_up(it->second);
        if (code < q.min_code || code > q.max_code) {
          throw std::invalid_argument("cluster " + std::to_string(c) + " mean for '" + q.id + "' is out of range");
        }
      }
      if (!(cl.noise_for(q.id) >= 0.0)) {
        throw std::invalid_argument("noise scales must be non-negative");
      }
    }
    for (const auto& [id, m] : cl.mean) {
      if (!schema.find(id)) {
        throw std::invalid_argument("cluster " + std::to_string(c) + " names unknown question '" + id + "'");
      }
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("cluster shares must sum to 1");
  }
}

double TurnoutSchedule::rate(std::size_t cluster, std::size_t day) const {
  double r = base_rate.at(cluster);
  if (shock && day >= shock->day && day < shock->day + shock->duration) {
    r *= shock->multiplier.at(cluster);
  }
  return r;
}

void TurnoutSchedule::check(std::size_t clusters) const {
  if (horizon_days == 0) {
    throw std::invalid_argument("schedule horizon must be at least one day");
  }
  if (base_rate.size() != clusters) {
    throw std::invalid_argument("schedule needs one base rate per cluster");
  }
  for (double r : base_rate) {
    if (!(r >= 0.0)) {
      throw std::invalid_argument("rates must be non-negative");
    }
  }
  if (shock) {
    if (shock->multiplier.size() != clusters) {
      throw std::invalid_argument("shock needs one multiplier per cluster");
    }
    for (double m : shock->multiplier) {
      if (!(m >= 0.0)) {
        throw std::invalid_argument("shock multipliers must be non-negative");
      }
    }
    if (shock->duration == 0 || shock->day + shock->duration > horizon_days) {
      throw std::invalid_argument("shock window must lie within the horizon");
    }
  }
}

PopulationProfile profile_from_json(const json& doc) {
  PopulationProfile p;
  for (const auto& c : doc.at("clusters")) {
    ClusterProfile cl;
    cl.share = c.at("share").get<double>();
    cl.mean = c.at("mean").get<std::map<std::string, double>>();
    if (c.contains("noise")) {
      if (c["noise"].is_number()) {
        cl.default_noise = c["noise"].get<double>();
      } else {
        cl.noise = c["noise"].get<std::map<std::string, double>>();
      }
    }
    cl.default_noise = c.value("default_noise", cl.default_noise);
    if (c.contains("demographics")) {
      cl.demographics = c["demographics"].get<std::map<std::string, std::map<std::string, double>>>();
    }
    p.clusters.push_back(std::move(cl));
  }
  return p;
}

TurnoutSchedule schedule_from_json(const json& doc, const PopulationProfile& profile) {
  TurnoutSchedule s;
  s.horizon_days = doc.at("horizon_days").get<std::size_t>();
  if (doc.contains("start")) {
    s.start = day_of(parse_timestamp(doc["start"].get<std::string>()));
  }
  if (doc.contains("base_rate")) {
    s.base_rate = doc["base_rate"].get<std::vector<double>>();
  } else {
    const double total = doc.at("daily_total").get<double>();
    for (double share : profile.shares()) {
      s.base_rate.push_back(total * share);
    }
  }
  if (doc.contains("shock") && !doc["shock"].is_null()) {
    const auto& sh = doc["shock"];
    s.shock = Shock{sh.at("day").get<std::size_t>(), sh.at("duration").get<std::size_t>(),
                    sh.at("multiplier").get<std::vector<double>>()};
  }
  s.check(profile.clusters.size());
  return s;
}

std::vector<Arrival> simulate_arrivals(const TurnoutSchedule& schedule, Day start, std::uint64_t seed) {
  schedule.check(schedule.base_rate.size());
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> second(0, 86399);
  std::vector<Arrival> out;
  for (std::size_t d = 0; d < schedule.horizon_days; ++d) {
    const TimePoint day_start{start + std::chrono::days(static_cast<int>(d))};
    const std::size_t first = out.size();
    for (std::size_t c = 0; c < schedule.base_rate.size(); ++c) {
      const double r = schedule.rate(c, d);
      if (r <= 0.0) {
        continue;
      }
      std::poisson_distribution<long> count(r);
      for (long k = count(rng); k > 0; --k) {
        out.push_back({day_start + std::chrono::seconds(second(rng)), c});
      }
    }
    // same-second ties keep a seed-determined order
    std::shuffle(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(), rng);
    std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                     [](const Arrival& a, const Arrival& b) { return a.at < b.at; });
  }
  return out;
}

SimulationResult simulate(const PopulationProfile& profile, const TurnoutSchedule& schedule, const BudgetSpec& spec,
                          std::uint64_t seed) {
  const auto schema = EncodingSchema::for_spec(spec);
  profile.check(schema);
  schedule.check(profile.clusters.size());
  Day start = schedule.start.value_or(spec.window() ? day_of(spec.window()->start)
                                                    : day_of(parse_timestamp("2020-01-01")));
  const auto arrivals = simulate_arrivals(schedule, start, seed);

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 8u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SimulationResult out{ResponseLog(spec), {}};
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const auto& cl = profile.clusters[arrivals[i].cluster];
    ResponseRecord r;
    r.respondent_id = padded_id(i);
    r.timestamp = arrivals[i].at;
    std::vector<double> draws(spec.areas().size(), 0.0);
    LikertBallot likert;
    RevenueBallot revenue;
    for (const auto& q : schema.questions()) {
      const double sd = cl.noise_for(q.id);
      const double v = cl.mean.at(q.id) + (sd > 0.0 ? sd * gauss(rng) : 0.0);
      const int code = std::clamp(round_half_up(v), q.min_code, q.max_code);
      switch (q.kind) {
        case QuestionKind::expenditure_delta:
          draws[*spec.area_index(q.ref)] = v;
          break;
        case QuestionKind::likert:
          likert.level[q.ref] = static_cast<LikertLevel>(code);
          break;
        case QuestionKind::fee:
          revenue.fee_level[q.ref] = static_cast<FeeLevel>(code);
          break;
        case QuestionKind::property_tax:
          revenue.property_tax = static_cast<PropertyTax>(code);
          break;
      }
    }
    if (spec.mode() == BallotMode::expenditure) {
      r.expenditure = from_steps(spec, repair_ballot(draws, spec));
    } else {
      r.expenditure = likert;
    }
    r.revenue = revenue;
    for (const auto& [axis, dist] : cl.demographics) {
      std::vector<std::string> cats;
      std::vector<double> w;
      for (const auto& [cat, p] : dist) {
        cats.push_back(cat);
        w.push_back(p);
      }
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      r.demographics[axis] = cats[pick(rng)];
    }
    out.log.append(std::move(r));
    out.labels.push_back(arrivals[i].cluster);
  }
  return out;
}

std::vector<std::size_t> null_schedule(std::size_t N, std::span<const double> shares, std::uint64_t seed) {
  const double total = std::accumulate(shares.begin(), shares.end(), 0.0);
  if (shares.empty() || std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("shares must sum to 1");
  }
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < shares.size(); ++c) {
    const double exact = static_cast<double>(N) * shares[c];
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < N; ++i, ++assigned) {
    ++counts[remainders[i % remainders.size()].second];
  }
  std::vector<std::size_t> labels;
  labels.reserve(N);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    labels.insert(labels.end(), counts[c], c);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 9u};
  std::mt19937_64 rng(seq);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace pbf
