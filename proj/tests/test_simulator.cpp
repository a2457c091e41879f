#include <algorithm>
#include <map>
#include <sstream>

#include "doctest.h"
#include "pbf/simulator.hpp"
#include "test_support.hpp"

using namespace pbf;

namespace {

// Mean vector for every schema question, expenditure deltas given per area.
ClusterProfile cluster(const EncodingSchema& schema, double share, std::map<std::string, double> overrides,
                       double noise) {
  ClusterProfile c;
  c.share = share;
  c.default_noise = noise;
  for (const auto& q : schema.questions()) {
    c.mean[q.id] = q.kind == QuestionKind::fee ? 1.0 : 0.0;
  }
  for (const auto& [k, v] : overrides) {
    c.mean[k] = v;
  }
  return c;
}

PopulationProfile three_clusters(const EncodingSchema& schema, double noise) {
  PopulationProfile p;
  p.clusters.push_back(cluster(schema, 0.3, {{"exp.APD", -6}, {"exp.APH", 3}, {"exp.NHCD", 3}, {"property_tax", 1}},
                               noise));
  p.clusters.push_back(cluster(schema, 0.4, {{"exp.APD", 2}, {"exp.AFD", -2}, {"fee.golf", 2}}, noise));
  p.clusters.push_back(cluster(schema, 0.3, {{"exp.PARD", 2}, {"exp.APL", -2}, {"fee.golf", 0}}, noise));
  p.clusters[0].demographics["age"] = {{"18-24", 0.6}, {"25-34", 0.4}};
  p.clusters[1].demographics["age"] = {{"55-64", 1.0}};
  return p;
}

TurnoutSchedule schedule(std::vector<double> rates, std::size_t horizon, std::optional<Shock> shock = {}) {
  TurnoutSchedule s;
  s.horizon_days = horizon;
  s.base_rate = std::move(rates);
  s.shock = std::move(shock);
  return s;
}

}  // namespace

TEST_CASE("zero noise single cluster reproduces the rounded mean") {
  const auto spec = austin2020();
  const auto schema = EncodingSchema::for_spec(spec);
  PopulationProfile p;
  p.clusters.push_back(cluster(schema, 1.0, {{"exp.APD", -4.4}, {"exp.APH", 2.6}, {"fee.golf", 1.6}}, 0.0));
  const auto r = simulate(p, schedule({20}, 5), spec, 1);
  REQUIRE(r.log.size() > 20);
  const auto first = encode_ordinal(r.log.records()[0], schema);
  for (const auto& rec : r.log.records()) {
    CHECK(encode_ordinal(rec, schema) == first);
  }
  const auto* golf = schema.find("fee.golf");
  CHECK(answer_code(r.log.records()[0], *golf) == 2);
  const auto* exp = r.log.records()[0].expenditure_ballot();
  const auto& apd_area = spec.areas()[*spec.area_index("APD")];
  const auto& aph_area = spec.areas()[*spec.area_index("APH")];
  // repair of (-4.4, +2.6, 0...) lands on the balanced point nearest in L1
  const auto d_apd = (exp->allocation.at("APD") - apd_area.baseline) / spec.increment();
  const auto d_aph = (exp->allocation.at("APH") - aph_area.baseline) / spec.increment();
  CHECK(d_apd + d_aph == 0);
  CHECK(d_apd <= -3);
  CHECK(d_apd >= -4);
}

TEST_CASE("simulation is seed-deterministic and every ballot is valid") {
  const auto spec = austin2020();
  const auto schema = EncodingSchema::for_spec(spec);
  const auto p = three_clusters(schema, 1.2);
  const auto s = schedule({10, 12, 8}, 20);
  const auto a = simulate(p, s, spec, 42);
  const auto b = simulate(p, s, spec, 42);
  const auto c = simulate(p, s, spec, 43);
  std::ostringstream oa;
  std::ostringstream ob;
  std::ostringstream oc;
  write_responses(oa, a.log);
  write_responses(ob, b.log);
  write_responses(oc, c.log);
  CHECK(oa.str() == ob.str());
  CHECK(a.labels == b.labels);
  CHECK(oa.str() != oc.str());
  for (const auto& r : a.log.records()) {
    CHECK(validate_record(spec, r).valid());
    CHECK(validate_expenditure(spec, *r.expenditure_ballot()).valid());
  }
  for (std::size_t i = 1; i < a.log.size(); ++i) {
    CHECK(a.log.records()[i - 1].timestamp <= a.log.records()[i].timestamp);
  }
  CHECK(a.labels.size() == a.log.size());
}

TEST_CASE("demographics follow the cluster distributions") {
  const auto spec = austin2020();
  const auto schema = EncodingSchema::for_spec(spec);
  const auto r = simulate(three_clusters(schema, 0.5), schedule({30, 30, 30}, 10), spec, 3);
  std::size_t young = 0;
  std::size_t zero = 0;
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto age = std::string(r.log.records()[i].demographic("age"));
    if (r.labels[i] == 1) {
      CHECK(age == "55-64");
    } else if (r.labels[i] == 2) {
      CHECK(age == std::string(kUnanswered));
    } else {
      ++zero;
      young += age == "18-24";
    }
  }
  REQUIRE(zero > 100);
  const double share = static_cast<double>(young) / static_cast<double>(zero);
  CHECK(share == doctest::Approx(0.6).epsilon(0.1));
}

TEST_CASE("likert specs simulate five-point answers") {
  const auto spec = austin2021();
  const auto schema = EncodingSchema::for_spec(spec);
  PopulationProfile p;
  p.clusters.push_back(cluster(schema, 1.0, {{"likert.APD", -1.7}}, 0.8));
  const auto r = simulate(p, schedule({15}, 4), spec, 8);
  REQUIRE(r.log.size() > 0);
  for (const auto& rec : r.log.records()) {
    REQUIRE(rec.likert_ballot());
    CHECK(validate_likert(spec, *rec.likert_ballot()).valid());
  }
}

TEST_CASE("a turnout shock raises the boosted cluster's daily share") {
  const auto spec = austin2020();
  const auto schema = EncodingSchema::for_spec(spec);
  const auto p = three_clusters(schema, 0.5);
  const auto s = schedule({6, 8, 6}, 60, Shock{25, 10, {5.0, 1.0, 1.0}});
  const auto r = simulate(p, s, spec, 11);
  std::size_t in0 = 0;
  std::size_t in_total = 0;
  std::size_t out0 = 0;
  std::size_t out_total = 0;
  const Day start = day_of(spec.window()->start);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto d = (day_of(r.log.records()[i].timestamp) - start).count();
    const bool in = d >= 25 && d < 35;
    (in ? in_total : out_total) += 1;
    if (r.labels[i] == 0) {
      (in ? in0 : out0) += 1;
    }
  }
  const double share_in = static_cast<double>(in0) / static_cast<double>(in_total);
  const double share_out = static_cast<double>(out0) / static_cast<double>(out_total);
  // expected 30/44 inside versus 6/20 outside
  CHECK(share_in > share_out + 0.25);
}

TEST_CASE("profile and schedule checks") {
  const auto spec = austin2020();
  const auto schema = EncodingSchema::for_spec(spec);
  auto p = three_clusters(schema, 0.5);
  p.clusters[0].share = 0.5;
  CHECK_THROWS_AS(p.check(schema), std::invalid_argument);
  p = three_clusters(schema, 0.5);
  p.clusters[1].mean.erase("fee.golf");
  CHECK_THROWS_AS(p.check(schema), std::invalid_argument);
  p = three_clusters(schema, 0.5);
  p.clusters[1].mean["fee.golf"] = 2.6;
  CHECK_THROWS_AS(p.check(schema), std::invalid_argument);
  CHECK_THROWS_AS(schedule({1, 1}, 10).check(3), std::invalid_argument);
  CHECK_THROWS_AS(schedule({1, 1, 1}, 10, Shock{8, 5, {5, 1, 1}}).check(3), std::invalid_argument);
  CHECK_THROWS_AS(schedule({1, -1, 1}, 10).check(3), std::invalid_argument);
}

TEST_CASE("profile and schedule from JSON") {
  const auto doc = nlohmann::json::parse(R"({
    "clusters": [
      {"share": 0.25, "mean": {"fee.golf": 2}, "noise": 0.5},
      {"share": 0.75, "mean": {"fee.golf": 0}, "noise": {"fee.golf": 0.1},
       "demographics": {"age": {"65+": 1.0}}}
    ]})");
  const auto p = profile_from_json(doc);
  REQUIRE(p.clusters.size() == 2);
  CHECK(p.clusters[0].noise_for("fee.golf") == 0.5);
  CHECK(p.clusters[1].noise_for("fee.golf") == 0.1);
  CHECK(p.clusters[1].noise_for("property_tax") == 0.0);
  const auto s = schedule_from_json(
      nlohmann::json::parse(R"({"horizon_days": 30, "start": "2020-05-01", "daily_total": 100,
                               "shock": {"day": 0, "duration": 5, "multiplier": [5, 1]}})"),
      p);
  CHECK(s.base_rate == std::vector<double>{25.0, 75.0});
  CHECK(s.rate(0, 2) == 125.0);
  CHECK(s.rate(0, 5) == 25.0);
  CHECK(s.rate(1, 2) == 75.0);
}

TEST_CASE("null schedules") {
  const std::vector<double> half{0.5, 0.5};
  CHECK(null_schedule(0, half, 1).empty());
  const auto two = null_schedule(2, half, 1);
  CHECK(std::count(two.begin(), two.end(), 0u) == 1);
  CHECK(null_schedule(2, half, 1) == two);

  const std::vector<double> shares{0.2, 0.5, 0.3};
  const auto labels = null_schedule(1000, shares, 5);
  CHECK(std::count(labels.begin(), labels.end(), 0u) == 200);
  CHECK(std::count(labels.begin(), labels.end(), 1u) == 500);

  // first-position frequency across seeds matches the shares
  std::vector<double> first(3, 0.0);
  const int runs = 3000;
  for (int s = 0; s < runs; ++s) {
    first[null_schedule(10, shares, static_cast<std::uint64_t>(s))[0]] += 1.0;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const double p = shares[c];
    CHECK(std::abs(first[c] / runs - p) < 3.0 * std::sqrt(p * (1 - p) / runs));
  }
  const std::vector<double> bad{0.5, 0.4};
  CHECK_THROWS_AS(null_schedule(10, bad, 1), std::invalid_argument);
}
