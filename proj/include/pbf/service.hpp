#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <random>
#include <string>
#include <string_view>

#include "json.hpp"
#include "pbf/ballot.hpp"
#include "pbf/datastore.hpp"

namespace pbf {

/// Wire form of a submission:
///   {self_cert: bool, challenge: string,
///    expenditure: {AREA: allocation_cents} | likert: {AREA: level},
///    revenue?: {property_tax: level, fees: {category: level}},
///    demographics?: {axis: category}}
/// Levels are label strings or integer codes. Throws DataError naming the
/// offending field.
ResponseRecord record_from_wire(const nlohmann::json& doc, const BudgetSpec& spec);
nlohmann::json record_to_wire(const ResponseRecord& record);
nlohmann::json validation_to_json(const ValidationReport& report);

using ChallengeChecker = std::function<bool(std::string_view token)>;

/// Test-mode stub: accepts exactly one configured token.
ChallengeChecker constant_challenge(std::string expected);
ChallengeChecker open_challenge();

/// 128-bit hex tokens from a seeded generator; never repeats a token.
class ReceiptIssuer {
 public:
  explicit ReceiptIssuer(std::uint64_t seed);
  std::string next();

 private:
  std::mt19937_64 rng_;
  std::set<std::string> issued_;
};

struct SubmissionReceipt {
  std::string receipt_id;
  TimePoint accepted_at;
  ValidationReport validation;
};

struct Reply {
  int status = 200;
  nlohmann::json body;
};

struct CollectorOptions {
  std::string admin_token;
  ChallengeChecker challenge = open_challenge();
  std::uint64_t seed = 0;
  bool enforce_window = true;
  std::function<TimePoint()> clock;  // defaults to the system clock
};

/// Per-question distributions, the aggregate budget (expenditure mode with at
/// least one ballot) and response counts by day, all from one log.
nlohmann::json results_document(const ResponseLog& log);

/// Transport-independent core of the collection service. Thread safe:
/// submissions are serialized on one mutex, results work on a copied snapshot.
class Collector {
 public:
  Collector(BudgetSpec spec, CollectorOptions options);

  const std::string& spec_document() const { return spec_document_; }
  /// 200 receipt, 400 malformed, 403 self-cert or challenge, 422 invalid.
  Reply submit(std::string_view body);
  Reply submit_document(const nlohmann::json& payload);
  /// 401 on a bad token.
  Reply results(std::string_view admin_token) const;

  ResponseLog snapshot() const;
  std::size_t size() const;

 private:
  BudgetSpec spec_;
  BudgetSpec validation_spec_;
  CollectorOptions options_;
  std::string spec_document_;
  mutable std::mutex mutex_;
  ResponseLog log_;
  ReceiptIssuer issuer_;
};

struct ServiceConfig {
  std::string spec;  // file path or builtin name
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  std::optional<std::string> challenge_token;
  std::optional<std::uint64_t> seed;
  bool enforce_window = true;
};

/// Config document: {spec, host?, port?, admin_token, challenge_token?, seed?,
/// enforce_window?}. A relative spec path resolves against the config's
/// directory. PBF_PORT and PBF_ADMIN_TOKEN override the file.
ServiceConfig service_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base = {});
ServiceConfig load_service_config(const std::filesystem::path& path);
void apply_env_overrides(ServiceConfig& config);
/// Throws std::runtime_error when the spec cannot be loaded or no admin token
/// is set, so a misconfigured service fails at startup.
std::unique_ptr<Collector> make_collector(const ServiceConfig& config);

/// HTTP front end: GET /api/spec, POST /api/ballot, GET /api/results?token=,
/// GET /healthz.
class HttpService {
 public:
  explicit HttpService(Collector& collector);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Port 0 binds an ephemeral port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pbf
