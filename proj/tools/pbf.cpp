// pbf: command-line front end for budget-exercise analysis.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pbf/aggregate.hpp"
#include "pbf/cluster.hpp"
#include "pbf/datastore.hpp"
#include "pbf/progression.hpp"
#include "pbf/report.hpp"
#include "pbf/service.hpp"
#include "pbf/simulator.hpp"
#include "pbf/spec_io.hpp"
#include "pbf/stats.hpp"

namespace {

using namespace pbf;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kInfeasible = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

void write_table(const Table& t, const std::string& path) {
  if (path.empty() || path == "-") {
    t.write_csv(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  t.write_csv(out);
}

Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  return read_csv_table(in, std::filesystem::path(path).stem().string());
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in '" + path + "': " + e.what());
  }
}

EncodingSchema::Sections parse_sections(const std::string& s) {
  if (s == "all") {
    return {true, true};
  }
  if (s == "expenditure") {
    return {true, false};
  }
  if (s == "revenue") {
    return {false, true};
  }
  throw UsageError("--sections must be all, expenditure or revenue");
}

// Shared response input: spec, file, optional segment filter.
struct ResponseInput {
  std::string spec;
  std::string in;
  std::string segments;   // cut timestamps
  std::string keep;       // 1-based segment indices to keep
  std::string sections = "all";

  void add_to(CLI::App* cmd, bool with_sections = false) {
    cmd->add_option("--spec", spec, "budget spec file or builtin name (austin2020, austin2021)")->required();
    cmd->add_option("--in", in, "responses CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--segments", segments, "comma-separated segment cut timestamps");
    cmd->add_option("--keep-segments", keep, "comma-separated 1-based segments to keep, e.g. 2,3");
    if (with_sections) {
      cmd->add_option("--sections", sections, "questions to encode: all, expenditure or revenue");
    }
  }

  std::vector<ResponseRecord> load(BudgetSpec* spec_out = nullptr) const {
    const auto budget = resolve_budget_spec(spec);
    auto result = load_responses(in, budget);
    if (!result.rejected.empty()) {
      std::cerr << result.rejected.size() << " invalid rows excluded\n";
    }
    if (spec_out) {
      *spec_out = budget;
    }
    const auto& log = result.log;
    std::vector<ResponseRecord> out;
    if (keep.empty()) {
      return log.records();
    }
    std::set<std::size_t> wanted;
    for (const auto& k : split_list(keep)) {
      const auto v = std::stoul(k);
      if (v == 0) {
        throw UsageError("--keep-segments is 1-based");
      }
      wanted.insert(v - 1);
    }
    std::optional<Segmentation> seg;
    if (!segments.empty()) {
      if (!budget.window()) {
        throw UsageError("--segments needs a spec with an exercise window");
      }
      seg = parse_segmentation(segments, budget.window()->start, budget.window()->end);
    }
    for (std::size_t i = 0; i < log.size(); ++i) {
      std::optional<std::size_t> s = seg ? std::optional(assign_segment(log.records()[i].timestamp, *seg))
                                         : log.segment(i);
      if (!s) {
        throw DataError("--keep-segments needs --segments or a segment column in the input");
      }
      if (wanted.count(*s)) {
        out.push_back(log.records()[i]);
      }
    }
    return out;
  }
};

struct WeightInput {
  std::string axis;
  std::string target;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--axis", axis, "demographic axis to post-stratify on");
    cmd->add_option("--target", target, "marginals CSV with axis,category,share columns")
        ->check(CLI::ExistingFile);
  }

  std::optional<WeightScheme> scheme(std::span<const ResponseRecord> records) const {
    if (axis.empty() != target.empty()) {
      throw UsageError("--axis and --target go together");
    }
    if (axis.empty()) {
      return std::nullopt;
    }
    const auto t = read_table_file(target);
    const auto ax = t.column("axis");
    const auto cat = t.column("category");
    const auto share = t.column("share");
    std::map<std::string, double> marginal;
    for (const auto& row : t.rows) {
      if (row.at(ax) == axis) {
        marginal[row.at(cat)] = std::stod(row.at(share));
      }
    }
    if (marginal.empty()) {
      throw DataError("target file has no rows for axis '" + axis + "'");
    }
    return poststratification_weights(records, axis, marginal);
  }
};

// Encoded matrix for clustering either responses or a PB election.
struct MatrixInput {
  ResponseInput responses;
  std::string pb;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--spec", responses.spec, "budget spec file or builtin name");
    cmd->add_option("--in", responses.in, "responses CSV")->check(CLI::ExistingFile);
    cmd->add_option("--pb", pb, "knapsack PB election log instead of responses")->check(CLI::ExistingFile);
    cmd->add_option("--segments", responses.segments, "comma-separated segment cut timestamps");
    cmd->add_option("--keep-segments", responses.keep, "comma-separated 1-based segments to keep");
    cmd->add_option("--sections", responses.sections, "questions to encode: all, expenditure or revenue");
  }

  FeatureMatrix load() const {
    if (!pb.empty()) {
      if (!responses.in.empty()) {
        throw UsageError("give either --in or --pb, not both");
      }
      return pb_feature_vectors(load_pb_election(pb));
    }
    if (responses.in.empty() || responses.spec.empty()) {
      throw UsageError("--spec and --in are required unless --pb is given");
    }
    BudgetSpec spec = resolve_budget_spec(responses.spec);
    const auto records = responses.load(&spec);
    const auto schema = EncodingSchema::for_spec(spec, parse_sections(responses.sections));
    const auto enc = encode_responses(records, schema);
    if (enc.skipped > 0) {
      std::cerr << enc.skipped << " responses with unanswered questions skipped\n";
    }
    return normalize_features(enc.matrix);
  }
};

std::vector<double> parse_z(const std::string& s) {
  std::vector<double> z;
  for (const auto& item : split_list(s)) {
    z.push_back(std::stod(item));
  }
  if (z.empty()) {
    throw UsageError("--z needs at least one level");
  }
  return z;
}

int run(int argc, char** argv) {
  CLI::App app{"Participatory budget exercise analysis"};
  app.require_subcommand(1);
  std::function<void()> action;

  // validate
  ResponseInput validate_in;
  std::string validate_out;
  auto* validate = app.add_subcommand("validate", "check a responses file and list rejected rows");
  validate->add_option("--spec", validate_in.spec, "budget spec")->required();
  validate->add_option("--in", validate_in.in, "responses CSV")->required()->check(CLI::ExistingFile);
  validate->add_option("--out", validate_out, "rejected rows CSV (default stdout)");
  validate->callback([&] {
    action = [&] {
      const auto spec = resolve_budget_spec(validate_in.spec);
      const auto result = load_responses(validate_in.in, spec);
      Table t;
      t.name = "rejected";
      t.header = {"line", "respondent_id", "reason"};
      for (const auto& r : result.rejected) {
        t.add_row({std::to_string(r.line), r.respondent_id, r.reason});
      }
      write_table(t, validate_out);
      std::cerr << result.log.size() << " valid, " << result.rejected.size() << " rejected\n";
    };
  });

  // aggregate
  ResponseInput agg_in;
  WeightInput agg_w;
  std::string agg_out;
  std::string agg_format = "csv";
  auto* aggregate = app.add_subcommand("aggregate", "balance-constrained median budget");
  agg_in.add_to(aggregate);
  agg_w.add_to(aggregate);
  aggregate->add_option("--out", agg_out, "output file (default stdout)");
  aggregate->add_option("--format", agg_format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));
  aggregate->callback([&] {
    action = [&] {
      BudgetSpec spec = resolve_budget_spec(agg_in.spec);
      const auto records = agg_in.load(&spec);
      if (spec.mode() != BallotMode::expenditure) {
        throw DataError("aggregate needs a reallocation (expenditure) exercise");
      }
      std::vector<ExpenditureBallot> ballots;
      std::vector<ResponseRecord> voters;
      for (const auto& r : records) {
        if (const auto* e = r.expenditure_ballot()) {
          ballots.push_back(*e);
          voters.push_back(r);
        }
      }
      if (ballots.empty()) {
        throw DataError("no expenditure ballots in the input");
      }
      const auto scheme = agg_w.scheme(voters);
      std::span<const double> weights;
      if (scheme) {
        weights = scheme->respondent_weights;
      }
      auto result = knapsack_aggregate(spec, std::span<const ExpenditureBallot>(ballots), weights);
      if (scheme) {
        result.weight_scheme_id = scheme->id;
      }
      if (agg_format == "markdown") {
        if (agg_out.empty()) {
          std::cout << result.to_markdown();
        } else {
          std::ofstream(agg_out) << result.to_markdown();
        }
      } else {
        write_table(result.to_table(), agg_out);
      }
    };
  });

  // tally
  ResponseInput tally_in;
  WeightInput tally_w;
  std::string tally_out;
  auto* tally = app.add_subcommand("tally", "answer distributions per question");
  tally_in.add_to(tally, true);
  tally_w.add_to(tally);
  tally->add_option("--out", tally_out, "output file (default stdout)");
  tally->callback([&] {
    action = [&] {
      BudgetSpec spec = resolve_budget_spec(tally_in.spec);
      const auto records = tally_in.load(&spec);
      const auto schema = EncodingSchema::for_spec(spec, parse_sections(tally_in.sections));
      const auto scheme = tally_w.scheme(records);
      std::vector<Distribution> dists;
      for (const auto& q : schema.questions()) {
        dists.push_back(scheme ? weighted_tally(records, *scheme, q) : tally_question(records, q));
      }
      write_table(distributions_table(dists), tally_out);
    };
  });

  // cluster
  MatrixInput cluster_in;
  std::size_t cluster_k = 3;
  std::uint64_t cluster_seed = 0;
  std::size_t cluster_boots = 0;
  std::string cluster_out;
  auto* cluster = app.add_subcommand("cluster", "k-means on normalized responses");
  cluster_in.add_to(cluster);
  cluster->add_option("--k", cluster_k, "number of clusters")->required()->check(CLI::PositiveNumber);
  cluster->add_option("--seed", cluster_seed, "random seed")->required();
  cluster->add_option("--boots", cluster_boots, "bootstrap resamples for stability (0 skips)");
  cluster->add_option("--out", cluster_out, "output directory")->required();
  cluster->callback([&] {
    action = [&] {
      const auto features = cluster_in.load();
      const auto model = kmeans_fit(features, cluster_k, cluster_seed);
      std::filesystem::create_directories(cluster_out);
      const std::filesystem::path dir(cluster_out);
      write_table(labels_table(model, features.row_ids), (dir / "labels.csv").string());
      write_table(centroids_table(model), (dir / "centroids.csv").string());
      save_model(model, dir / "model.json");
      if (cluster_boots > 0) {
        const auto report = bootstrap_stability(features.values, cluster_k, cluster_boots, cluster_seed);
        write_table(report.to_table(model.columns), (dir / "bootstrap.csv").string());
        std::cerr << "bootstrap accuracy " << format_fixed(report.accuracy, 4) << '\n';
      }
    };
  });

  // gap
  MatrixInput gap_in;
  std::size_t gap_kmax = 10;
  std::size_t gap_boots = 20;
  std::uint64_t gap_seed = 0;
  std::string gap_out;
  auto* gap = app.add_subcommand("gap", "gap statistic curve and chosen cluster count");
  gap_in.add_to(gap);
  gap->add_option("--kmax", gap_kmax, "largest k to evaluate")->check(CLI::PositiveNumber);
  gap->add_option("--boots", gap_boots, "reference data sets per k")->check(CLI::PositiveNumber);
  gap->add_option("--seed", gap_seed, "random seed")->required();
  gap->add_option("--out", gap_out, "output file (default stdout)");
  gap->callback([&] {
    action = [&] {
      const auto features = gap_in.load();
      const auto curve = gap_statistic(features.values, gap_kmax, gap_boots, gap_seed);
      write_table(curve.to_table(), gap_out);
      std::cerr << "chosen k " << curve.chosen_k << '\n';
    };
  });

  // progression
  std::string prog_labels;
  std::string prog_spec;
  std::string prog_in;
  std::string prog_z = "1,2";
  std::size_t prog_shuffles = 0;
  std::optional<std::uint64_t> prog_seed;
  std::string prog_out;
  auto* progression = app.add_subcommand("progression", "cumulative cluster fractions with null bands");
  progression->add_option("--labels", prog_labels, "labels CSV (row_id, cluster) in arrival order")
      ->required()
      ->check(CLI::ExistingFile);
  progression->add_option("--spec", prog_spec, "budget spec, to date the labels from --in");
  progression->add_option("--in", prog_in, "responses CSV supplying arrival dates")->check(CLI::ExistingFile);
  progression->add_option("--z", prog_z, "band levels in standard deviations");
  progression->add_option("--shuffles", prog_shuffles, "within-day reshuffles for robustness (needs --in)");
  progression->add_option("--seed", prog_seed, "random seed for --shuffles");
  progression->add_option("--out", prog_out, "output directory")->required();
  progression->callback([&] {
    action = [&] {
      const auto z = parse_z(prog_z);
      const auto t = read_table_file(prog_labels);
      const auto id_col = t.column("row_id");
      const auto label_col = t.column("cluster");
      std::vector<std::pair<std::string, std::size_t>> rows;
      for (const auto& r : t.rows) {
        rows.emplace_back(r.at(id_col), std::stoul(r.at(label_col)));
      }
      ReportBundle bundle;
      std::vector<std::size_t> labels;
      if (!prog_in.empty()) {
        if (prog_spec.empty()) {
          throw UsageError("--in needs --spec");
        }
        const auto log = load_responses(prog_in, resolve_budget_spec(prog_spec)).log;
        std::map<std::string, std::size_t> label_of(rows.begin(), rows.end());
        std::vector<std::pair<TimePoint, std::size_t>> timed;
        for (const auto& r : log.records()) {
          auto it = label_of.find(r.respondent_id);
          if (it != label_of.end()) {
            timed.emplace_back(r.timestamp, it->second);
          }
        }
        std::stable_sort(timed.begin(), timed.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<Day, std::size_t>> dated;
        for (const auto& [tp, l] : timed) {
          dated.emplace_back(day_of(tp), l);
          labels.push_back(l);
        }
        const auto daily = daily_cluster_proportions(dated);
        auto daily_table = daily.to_table();
        daily_table.name = "daily_proportions_table";
        bundle.add_table(std::move(daily_table));
        bundle.add_series(daily_proportion_plot(daily));
        if (prog_shuffles > 0) {
          if (!prog_seed) {
            throw UsageError("--shuffles needs --seed");
          }
          Table rt;
          rt.name = "shuffle_robustness";
          rt.header = {"cluster", "min_max_z", "max_max_z"};
          for (const auto& r : within_day_shuffle_robustness(dated, prog_shuffles, *prog_seed)) {
            rt.add_row({std::to_string(r.label), format_fixed(r.min_max_z, 4), format_fixed(r.max_max_z, 4)});
          }
          bundle.add_table(std::move(rt));
        }
      } else {
        for (const auto& [id, l] : rows) {
          labels.push_back(l);
        }
      }
      const auto series = cumulative_cluster_fraction(labels);
      const auto bands = hypergeometric_bands(series);
      auto table = progression_table(series, bands);
      table.name = "progression_table";
      bundle.add_table(std::move(table));
      auto excursions = scan_excursions(series, bands, z).to_table();
      excursions.name = "excursions";
      bundle.add_table(std::move(excursions));
      bundle.add_series(progression_plot(series, bands, z));
      bundle.write(prog_out);
    };
  });

  // reweight
  ResponseInput rw_in;
  WeightInput rw_w;
  std::string rw_out;
  std::string rw_tally_out;
  auto* reweight = app.add_subcommand("reweight", "post-stratification weights against census marginals");
  rw_in.add_to(reweight, true);
  rw_w.add_to(reweight);
  reweight->get_option("--axis")->required();
  reweight->get_option("--target")->required();
  reweight->add_option("--out", rw_out, "weights table (default stdout)");
  reweight->add_option("--tally-out", rw_tally_out, "weighted answer distributions");
  reweight->callback([&] {
    action = [&] {
      BudgetSpec spec = resolve_budget_spec(rw_in.spec);
      const auto records = rw_in.load(&spec);
      const auto scheme = *rw_w.scheme(records);
      write_table(scheme.to_table(), rw_out);
      if (!rw_tally_out.empty()) {
        std::vector<Distribution> dists;
        const auto schema = EncodingSchema::for_spec(spec, parse_sections(rw_in.sections));
        for (const auto& q : schema.questions()) {
          dists.push_back(weighted_tally(records, scheme, q));
        }
        write_table(distributions_table(dists), rw_tally_out);
      }
      std::cerr << scheme.excluded << " respondents excluded from the weighting\n";
    };
  });

  // crosstab
  std::string ct_in;
  std::string ct_columns;
  std::string ct_out;
  std::string ct_tests_out;
  auto* crosstab_cmd = app.add_subcommand("crosstab", "per-row goodness of fit and rank correlation of a count table");
  crosstab_cmd->add_option("--in", ct_in, "count table CSV: row label column then one column per category")
      ->required()
      ->check(CLI::ExistingFile);
  crosstab_cmd->add_option("--columns", ct_columns, "comma-separated subset of columns, in order");
  crosstab_cmd->add_option("--out", ct_out, "goodness-of-fit table (default stdout)");
  crosstab_cmd->add_option("--tests-out", ct_tests_out, "independence and Spearman results");
  crosstab_cmd->callback([&] {
    action = [&] {
      auto t = load_crosstab(ct_in);
      if (!ct_columns.empty()) {
        t = t.select_columns(split_list(ct_columns));
      }
      write_table(gof_table(t, per_row_gof(t)), ct_out);
      if (!ct_tests_out.empty()) {
        const auto indep = chi_square_independence(t);
        const auto rho = spearman_rho(t);
        Table tests;
        tests.name = "crosstab_tests";
        tests.header = {"test", "statistic", "df", "p", "n"};
        tests.add_row({"chi_square_independence", format_fixed(indep.statistic, 4), std::to_string(indep.df),
                       format_fixed(indep.p, 6), format_fixed(t.n(), 0)});
        tests.add_row({"spearman_rho", format_fixed(rho.rho, 4), format_fixed(rho.n - 2, 0), format_fixed(rho.p, 6),
                       format_fixed(rho.n, 0)});
        write_table(tests, ct_tests_out);
      }
    };
  });

  // scenarios
  std::string sc_spec;
  std::string sc_model;
  std::string sc_sections = "all";
  std::string sc_out;
  auto* scenarios = app.add_subcommand("scenarios", "follow-up scenarios from cluster centroids");
  scenarios->add_option("--spec", sc_spec, "budget spec")->required();
  scenarios->add_option("--model", sc_model, "cluster model JSON")->required()->check(CLI::ExistingFile);
  scenarios->add_option("--sections", sc_sections, "schema sections the model was fitted on: all, expenditure or revenue");
  scenarios->add_option("--out", sc_out, "output file (default stdout)");
  scenarios->callback([&] {
    action = [&] {
      const auto spec = resolve_budget_spec(sc_spec);
      const auto schema = EncodingSchema::for_spec(spec, parse_sections(sc_sections));
      write_table(scenarios_from_centroids(load_model(sc_model), schema).to_table(schema), sc_out);
    };
  });

  // simulate
  std::string sim_spec;
  std::string sim_profile;
  std::string sim_schedule;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  std::string sim_labels;
  auto* simulate_cmd = app.add_subcommand("simulate", "synthetic electorate from cluster profiles");
  simulate_cmd->add_option("--spec", sim_spec, "budget spec")->required();
  simulate_cmd->add_option("--profile", sim_profile, "population profile JSON")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--schedule", sim_schedule, "turnout schedule JSON")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--seed", sim_seed, "random seed")->required();
  simulate_cmd->add_option("--out", sim_out, "responses CSV")->required();
  simulate_cmd->add_option("--labels-out", sim_labels, "ground-truth labels CSV (row_id, cluster)");
  simulate_cmd->callback([&] {
    action = [&] {
      const auto spec = resolve_budget_spec(sim_spec);
      const auto profile = profile_from_json(read_json_file(sim_profile));
      const auto schedule = schedule_from_json(read_json_file(sim_schedule), profile);
      const auto result = simulate(profile, schedule, spec, sim_seed);
      save_responses(sim_out, result.log);
      if (!sim_labels.empty()) {
        Table t;
        t.name = "labels";
        t.header = {"row_id", "cluster"};
        for (std::size_t i = 0; i < result.labels.size(); ++i) {
          t.add_row({result.log.records()[i].respondent_id, std::to_string(result.labels[i])});
        }
        write_table(t, sim_labels);
      }
      std::cerr << result.log.size() << " responses simulated\n";
    };
  });

  // anonymize
  std::string an_spec;
  std::string an_in;
  std::string an_out;
  std::uint64_t an_seed = 0;
  auto* anonymize_cmd = app.add_subcommand("anonymize", "day-granular, within-day shuffled copy of a responses file");
  anonymize_cmd->add_option("--spec", an_spec, "budget spec")->required();
  anonymize_cmd->add_option("--in", an_in, "responses CSV")->required()->check(CLI::ExistingFile);
  anonymize_cmd->add_option("--out", an_out, "output CSV")->required();
  anonymize_cmd->add_option("--seed", an_seed, "random seed")->required();
  anonymize_cmd->callback([&] {
    action = [&] {
      const auto log = load_responses(an_in, resolve_budget_spec(an_spec)).log;
      save_responses(an_out, anonymize(log, an_seed));
    };
  });

  // clean-pb
  std::string pb_in;
  std::string pb_out;
  std::size_t pb_min = 100;
  auto* clean_pb = app.add_subcommand("clean-pb", "drop empty votes and the fastest and slowest 10% of voters");
  clean_pb->add_option("--in", pb_in, "PB election log")->required()->check(CLI::ExistingFile);
  clean_pb->add_option("--out", pb_out, "cleaned election log")->required();
  clean_pb->add_option("--min-votes", pb_min, "exclude elections with fewer surviving votes");
  clean_pb->callback([&] {
    action = [&] {
      const auto cleaned = clean_pb_election(load_pb_election(pb_in), pb_min);
      std::ofstream out(pb_out);
      write_pb_election(out, cleaned.election);
      std::cerr << cleaned.election.votes.size() << " votes kept, " << cleaned.empty_removed << " empty removed, "
                << cleaned.trimmed_per_side << " trimmed per side" << (cleaned.excluded ? ", excluded" : "") << '\n';
    };
  });

  // report
  std::string rep_fixtures;
  std::string rep_out;
  auto* report = app.add_subcommand("report", "regenerate report tables");
  report->add_option("--fixtures", rep_fixtures, "'published' or a directory of published-table fixtures")
      ->required();
  report->add_option("--out", rep_out, "output directory")->required();
  report->callback([&] {
    action = [&] {
      const std::filesystem::path dir =
          rep_fixtures == "published" ? data_dir() / "published_tables" : std::filesystem::path(rep_fixtures);
      if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("no fixture directory '" + dir.string() + "'");
      }
      fixture_report(dir).write(rep_out);
    };
  });

  // serve
  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "run the ballot collection service");
  serve->add_option("--config", serve_config, "service config JSON")->required()->check(CLI::ExistingFile);
  serve->callback([&] {
    action = [&] {
      const auto config = load_service_config(serve_config);
      auto collector = make_collector(config);
      HttpService service(*collector);
      const int port = service.bind(config.host, config.port);
      std::cerr << "listening on " << config.host << ':' << port << '\n';
      service.run();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
