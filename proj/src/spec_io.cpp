#include "pbf/spec_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pbf {

using nlohmann::json;

BudgetSpec budget_spec_from_json(const json& doc) {
  std::vector<ServiceArea> areas;
  for (const auto& a : doc.at("areas")) {
    areas.push_back(ServiceArea{a.at("id").get<std::string>(), a.value("name", a.at("id").get<std::string>()),
                                a.at("baseline_cents").get<Cents>()});
  }
  std::vector<std::string> fees;
  std::map<std::string, std::string> fee_names;
  for (const auto& f : doc.value("fee_categories", json::array())) {
    if (f.is_string()) {
      fees.push_back(f.get<std::string>());
    } else {
      fees.push_back(f.at("id").get<std::string>());
      if (f.contains("name")) {
        fee_names[fees.back()] = f.at("name").get<std::string>();
      }
    }
  }
  std::vector<DemographicAxis> axes;
  for (const auto& ax : doc.value("demographic_axes", json::array())) {
    axes.push_back(DemographicAxis{ax.at("id").get<std::string>(),
                                   ax.value("categories", std::vector<std::string>{}),
                                   ax.value("free_text", false)});
  }
  const auto mode_name = doc.value("mode", std::string("expenditure"));
  BallotMode mode;
  if (mode_name == "expenditure") {
    mode = BallotMode::expenditure;
  } else if (mode_name == "likert") {
    mode = BallotMode::likert;
  } else {
    throw std::invalid_argument("unknown ballot mode '" + mode_name + "'");
  }
  std::optional<ExerciseWindow> window;
  if (doc.contains("window")) {
    window = ExerciseWindow{parse_timestamp(doc["window"].at("start").get<std::string>()),
                            parse_timestamp(doc["window"].at("end").get<std::string>())};
  }
  const json& ff = doc.at("floor_fraction");
  const Ratio floor = ff.is_string() ? Ratio::from_double(std::stod(ff.get<std::string>()))
                                     : Ratio::from_double(ff.get<double>());
  BudgetSpec spec(std::move(areas), doc.at("increment_cents").get<Cents>(), floor, std::move(fees), std::move(axes),
                  mode, window);
  return fee_names.empty() ? spec : spec.with_fee_names(std::move(fee_names));
}

json budget_spec_to_json(const BudgetSpec& spec) {
  json doc;
  doc["mode"] = spec.mode() == BallotMode::expenditure ? "expenditure" : "likert";
  doc["increment_cents"] = spec.increment();
  doc["floor_fraction"] = spec.floor_fraction().value();
  doc["total_cents"] = spec.total();
  json areas = json::array();
  for (const auto& a : spec.areas()) {
    areas.push_back({{"id", a.id}, {"name", a.name}, {"baseline_cents", a.baseline}});
  }
  doc["areas"] = std::move(areas);
  json fees = json::array();
  for (const auto& f : spec.fee_categories()) {
    fees.push_back({{"id", f}, {"name", spec.fee_name(f)}});
  }
  doc["fee_categories"] = std::move(fees);
  json axes = json::array();
  for (const auto& ax : spec.demographic_axes()) {
    json a{{"id", ax.id}, {"categories", ax.categories}};
    if (ax.free_text) {
      a["free_text"] = true;
    }
    axes.push_back(std::move(a));
  }
  doc["demographic_axes"] = std::move(axes);
  if (const auto& w = spec.window()) {
    doc["window"] = {{"start", format_timestamp(w->start)}, {"end", format_timestamp(w->end)}};
  }
  return doc;
}

BudgetSpec load_budget_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open budget spec '" + path.string() + "'");
  }
  try {
    return budget_spec_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed budget spec '" + path.string() + "': " + e.what());
  }
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("PBF_DATA_DIR"); env && *env) {
    return env;
  }
  return PBF_DEFAULT_DATA_DIR;
}

BudgetSpec resolve_budget_spec(const std::string& name_or_path) {
  const std::filesystem::path path(name_or_path);
  if (std::filesystem::exists(path)) {
    return load_budget_spec(path);
  }
  const auto builtin = data_dir() / "specs" / (name_or_path + ".json");
  if (name_or_path.find('/') == std::string::npos && std::filesystem::exists(builtin)) {
    return load_budget_spec(builtin);
  }
  throw std::runtime_error("no budget spec file or builtin named '" + name_or_path + "'");
}

Segmentation parse_segmentation(const std::string& cuts, TimePoint start, TimePoint end) {
  std::vector<TimePoint> points;
  std::istringstream in(cuts);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      points.push_back(parse_timestamp(item));
    }
  }
  return Segmentation(start, std::move(points), end);
}

}  // namespace pbf
