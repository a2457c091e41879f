#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "pbf/ballot.hpp"

namespace pbf {

/// Budget spec document:
///   {areas:[{id,name,baseline_cents}], increment_cents, floor_fraction,
///    fee_categories:[id | {id,name}], demographic_axes:[{id, categories, free_text?}],
///    mode?: "expenditure"|"likert", window?: {start, end}}
BudgetSpec budget_spec_from_json(const nlohmann::json& doc);
nlohmann::json budget_spec_to_json(const BudgetSpec& spec);
BudgetSpec load_budget_spec(const std::filesystem::path& path);

/// Shipped data directory; PBF_DATA_DIR overrides the build-time location.
std::filesystem::path data_dir();
/// An existing file path, else a builtin name such as "austin2020".
BudgetSpec resolve_budget_spec(const std::string& name_or_path);

/// "a,b" list of ISO timestamps; the window comes from the spec or the
/// explicit start/end.
Segmentation parse_segmentation(const std::string& cuts, TimePoint start, TimePoint end);

}  // namespace pbf
