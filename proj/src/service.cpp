#include "pbf/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>

#include "httplib.h"
#include "pbf/aggregate.hpp"
#include "pbf/spec_io.hpp"
#include "pbf/table.hpp"

namespace pbf {

using nlohmann::json;

namespace {

template <typename Enum>
Enum level_from_wire(const json& v, const std::vector<std::string>& labels, int first_code, const std::string& field) {
  if (v.is_number_integer()) {
    return static_cast<Enum>(v.get<int>());
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    auto it = std::find(labels.begin(), labels.end(), s);
    if (it != labels.end()) {
      return static_cast<Enum>(first_code + static_cast<int>(it - labels.begin()));
    }
    throw DataError(field + ": unknown level '" + s + "'");
  }
  throw DataError(field + ": expected a level label or integer code");
}

const json& object_field(const json& doc, const char* name) {
  const auto& v = doc.at(name);
  if (!v.is_object()) {
    throw DataError(std::string(name) + ": expected an object");
  }
  return v;
}

std::string label_or_code(const std::vector<std::string>& labels, int first_code, int code) {
  const int i = code - first_code;
  if (i >= 0 && i < static_cast<int>(labels.size())) {
    return labels[static_cast<std::size_t>(i)];
  }
  return std::to_string(code);
}

bool same_token(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) {
    return false;
  }
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  }
  return diff == 0;
}

BudgetSpec without_window(const BudgetSpec& spec) {
  std::map<std::string, std::string> names;
  for (const auto& f : spec.fee_categories()) {
    names[f] = spec.fee_name(f);
  }
  return BudgetSpec(spec.areas(), spec.increment(), spec.floor_fraction(), spec.fee_categories(),
                    spec.demographic_axes(), spec.mode(), std::nullopt)
      .with_fee_names(std::move(names));
}

Reply error_reply(int status, std::string message) { return {status, json{{"error", std::move(message)}}}; }

}  // namespace

ResponseRecord record_from_wire(const json& doc, const BudgetSpec& spec) {
  if (!doc.is_object()) {
    throw DataError("submission must be a JSON object");
  }
  ResponseRecord r;
  try {
    if (doc.contains("expenditure")) {
      if (spec.mode() != BallotMode::expenditure) {
        throw DataError("expenditure: this exercise uses the five-point scale");
      }
      ExpenditureBallot b;
      for (const auto& [area, v] : object_field(doc, "expenditure").items()) {
        if (!v.is_number_integer()) {
          throw DataError("expenditure." + area + ": expected integer cents");
        }
        b.allocation[area] = v.get<Cents>();
      }
      r.expenditure = b;
    }
    if (doc.contains("likert")) {
      if (spec.mode() != BallotMode::likert) {
        throw DataError("likert: this exercise uses budget reallocation");
      }
      LikertBallot b;
      for (const auto& [area, v] : object_field(doc, "likert").items()) {
        b.level[area] = level_from_wire<LikertLevel>(v, likert_level_labels(), -2, "likert." + area);
      }
      r.expenditure = b;
    }
    if (doc.contains("revenue") && !doc["revenue"].is_null()) {
      const auto& rev = object_field(doc, "revenue");
      RevenueBallot b;
      if (!rev.contains("property_tax")) {
        throw DataError("revenue.property_tax: missing");
      }
      b.property_tax = level_from_wire<PropertyTax>(rev["property_tax"], property_tax_labels(), -1,
                                                    "revenue.property_tax");
      if (rev.contains("fees")) {
        for (const auto& [cat, v] : object_field(rev, "fees").items()) {
          b.fee_level[cat] = level_from_wire<FeeLevel>(v, fee_level_labels(), 0, "revenue.fees." + cat);
        }
      }
      r.revenue = b;
    }
    if (doc.contains("demographics")) {
      for (const auto& [axis, v] : object_field(doc, "demographics").items()) {
        if (!v.is_string()) {
          throw DataError("demographics." + axis + ": expected a string");
        }
        r.demographics[axis] = v.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed submission: ") + e.what());
  }
  return r;
}

json record_to_wire(const ResponseRecord& record) {
  json doc = json::object();
  if (const auto* e = record.expenditure_ballot()) {
    doc["expenditure"] = e->allocation;
  }
  if (const auto* l = record.likert_ballot()) {
    json lv = json::object();
    for (const auto& [area, level] : l->level) {
      lv[area] = label_or_code(likert_level_labels(), -2, static_cast<int>(level));
    }
    doc["likert"] = lv;
  }
  if (record.revenue) {
    json fees = json::object();
    for (const auto& [cat, level] : record.revenue->fee_level) {
      fees[cat] = label_or_code(fee_level_labels(), 0, static_cast<int>(level));
    }
    doc["revenue"] = {
        {"property_tax", label_or_code(property_tax_labels(), -1, static_cast<int>(record.revenue->property_tax))},
        {"fees", fees}};
  }
  if (!record.demographics.empty()) {
    doc["demographics"] = record.demographics;
  }
  return doc;
}

json validation_to_json(const ValidationReport& report) {
  json v = json::array();
  for (const auto& x : report.violations) {
    v.push_back({{"constraint", std::string(to_string(x.constraint))},
                 {"area", x.area_id ? json(*x.area_id) : json(nullptr)},
                 {"detail", x.detail}});
  }
  return {{"valid", report.valid()}, {"violations", v}};
}

ChallengeChecker constant_challenge(std::string expected) {
  return [expected = std::move(expected)](std::string_view token) { return same_token(token, expected); };
}

ChallengeChecker open_challenge() {
  return [](std::string_view) { return true; };
}

ReceiptIssuer::ReceiptIssuer(std::uint64_t seed)
    : rng_([seed] {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 11u};
        return std::mt19937_64(seq);
      }()) {}

std::string ReceiptIssuer::next() {
  static constexpr char hex[] = "0123456789abcdef";
  for (;;) {
    std::string token;
    for (int w = 0; w < 2; ++w) {
      std::uint64_t v = rng_();
      for (int i = 0; i < 16; ++i, v >>= 4) {
        token.push_back(hex[v & 0xf]);
      }
    }
    if (issued_.insert(token).second) {
      return token;
    }
  }
}

json results_document(const ResponseLog& log) {
  const auto& spec = log.spec();
  const auto& records = log.records();
  std::map<Day, std::size_t> per_day;
  for (const auto& r : records) {
    ++per_day[day_of(r.timestamp)];
  }
  json by_day = json::array();
  for (const auto& [d, n] : per_day) {
    by_day.push_back({{"date", format_date(d)}, {"count", n}});
  }

  json distributions = json::array();
  const auto schema = EncodingSchema::for_spec(spec);
  for (const auto& q : schema.questions()) {
    const bool answered = std::any_of(records.begin(), records.end(),
                                      [&](const ResponseRecord& r) { return tally_level_index(r, q).has_value(); });
    json shares = json::object();
    std::size_t n = 0;
    if (answered) {
      const auto dist = tally_question(records, q);
      for (const auto& s : dist.shares) {
        shares[s.level] = s.proportion;
      }
      n = dist.n;
    }
    distributions.push_back({{"question_id", q.id}, {"n", n}, {"shares", shares}});
  }

  json aggregate = nullptr;
  if (spec.mode() == BallotMode::expenditure) {
    std::vector<ExpenditureBallot> ballots;
    for (const auto& r : records) {
      if (const auto* e = r.expenditure_ballot()) {
        ballots.push_back(*e);
      }
    }
    if (!ballots.empty()) {
      const auto agg = knapsack_aggregate(spec, std::span<const ExpenditureBallot>(ballots));
      json areas = json::array();
      for (const auto& a : agg.areas) {
        areas.push_back({{"area_id", a.area_id},
                         {"name", a.name},
                         {"baseline_cents", a.baseline},
                         {"change_cents", a.change},
                         {"change_pct", a.change_pct}});
      }
      aggregate = {{"ballots", ballots.size()}, {"objective", agg.objective}, {"areas", areas}};
    }
  }
  return {{"count", records.size()}, {"by_day", by_day}, {"distributions", distributions}, {"aggregate", aggregate}};
}

Collector::Collector(BudgetSpec spec, CollectorOptions options)
    : spec_(spec),
      validation_spec_(options.enforce_window ? spec : without_window(spec)),
      options_(std::move(options)),
      spec_document_(budget_spec_to_json(spec_).dump()),
      log_(validation_spec_),
      issuer_(options_.seed) {
  if (options_.admin_token.empty()) {
    throw std::runtime_error("service needs a non-empty admin token");
  }
  if (!options_.challenge) {
    options_.challenge = open_challenge();
  }
  if (!options_.clock) {
    options_.clock = [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
  }
}

Reply Collector::submit(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, std::string("malformed JSON: ") + e.what());
  }
  return submit_document(doc);
}

Reply Collector::submit_document(const json& payload) {
  if (!payload.is_object()) {
    return error_reply(400, "submission must be a JSON object");
  }
  if (!payload.contains("self_cert") || payload["self_cert"] != true) {
    return error_reply(403, "residency self-certification is required");
  }
  const auto challenge = payload.value("challenge", json(nullptr));
  if (!options_.challenge(challenge.is_string() ? challenge.get<std::string>() : std::string())) {
    return error_reply(403, "challenge token rejected");
  }
  ResponseRecord record;
  try {
    record = record_from_wire(payload, spec_);
  } catch (const DataError& e) {
    return error_reply(400, e.what());
  }

  std::lock_guard lock(mutex_);
  record.timestamp = options_.clock();
  ValidationReport report;
  if (!record.expenditure) {
    report.violations.push_back({Constraint::coverage, std::nullopt, "expenditure section is missing"});
  }
  report.merge(validate_record(validation_spec_, record));
  if (!report.valid()) {
    return {422, json{{"error", "ballot failed validation"}, {"validation", validation_to_json(report)}}};
  }
  SubmissionReceipt receipt{issuer_.next(), record.timestamp, report};
  record.respondent_id = receipt.receipt_id;
  log_.append(std::move(record));
  return {200, json{{"receipt_id", receipt.receipt_id},
                    {"accepted_at", format_timestamp(receipt.accepted_at)},
                    {"validation", validation_to_json(receipt.validation)}}};
}

Reply Collector::results(std::string_view admin_token) const {
  if (!same_token(admin_token, options_.admin_token)) {
    return error_reply(401, "admin token required");
  }
  return {200, results_document(snapshot())};
}

ResponseLog Collector::snapshot() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t Collector::size() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

ServiceConfig service_config_from_json(const json& doc, const std::filesystem::path& base) {
  ServiceConfig c;
  try {
    c.spec = doc.at("spec").get<std::string>();
    if (!base.empty() && c.spec.find('/') != std::string::npos && std::filesystem::path(c.spec).is_relative()) {
      c.spec = (base / c.spec).string();
    }
    c.host = doc.value("host", c.host);
    c.port = doc.value("port", c.port);
    c.admin_token = doc.value("admin_token", std::string());
    if (doc.contains("challenge_token")) {
      c.challenge_token = doc["challenge_token"].get<std::string>();
    }
    if (doc.contains("seed")) {
      c.seed = doc["seed"].get<std::uint64_t>();
    }
    c.enforce_window = doc.value("enforce_window", true);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed service config: ") + e.what());
  }
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open service config '" + path.string() + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed service config '" + path.string() + "': " + e.what());
  }
  auto c = service_config_from_json(doc, path.parent_path());
  apply_env_overrides(c);
  return c;
}

void apply_env_overrides(ServiceConfig& config) {
  if (const char* port = std::getenv("PBF_PORT"); port && *port) {
    try {
      config.port = std::stoi(port);
    } catch (const std::exception&) {
      throw DataError(std::string("PBF_PORT is not a port number: ") + port);
    }
  }
  if (const char* token = std::getenv("PBF_ADMIN_TOKEN"); token && *token) {
    config.admin_token = token;
  }
}

std::unique_ptr<Collector> make_collector(const ServiceConfig& config) {
  if (config.spec.empty()) {
    throw std::runtime_error("service config names no budget spec");
  }
  CollectorOptions o;
  o.admin_token = config.admin_token;
  o.challenge = config.challenge_token ? constant_challenge(*config.challenge_token) : open_challenge();
  o.seed = config.seed.value_or(std::random_device{}());
  o.enforce_window = config.enforce_window;
  return std::make_unique<Collector>(resolve_budget_spec(config.spec), std::move(o));
}

struct HttpService::Impl {
  Collector& collector;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const Reply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

}  // namespace

HttpService::HttpService(Collector& collector) : impl_(new Impl{collector, {}}) {
  auto& svr = impl_->server;
  auto* c = &collector;
  svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send(res, {200, {{"status", "ok"}}}); });
  svr.Get("/api/spec", [c](const httplib::Request&, httplib::Response& res) {
    res.set_content(c->spec_document(), "application/json");
  });
  svr.Post("/api/ballot", [c](const httplib::Request& req, httplib::Response& res) { send(res, c->submit(req.body)); });
  svr.Get("/api/results", [c](const httplib::Request& req, httplib::Response& res) {
    send(res, c->results(req.has_param("token") ? req.get_param_value("token") : std::string()));
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) {
      throw std::runtime_error("cannot bind " + host);
    }
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) {
    impl_->server.stop();
  }
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace pbf
