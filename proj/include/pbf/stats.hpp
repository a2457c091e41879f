#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbf/aggregate.hpp"
#include "pbf/ballot.hpp"
#include "pbf/table.hpp"

namespace pbf {

/// Counts over two ordinal axes, categories in declared order.
struct CrossTab {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> counts;

  double n() const;
  double row_total(std::size_t i) const;
  double col_total(std::size_t j) const;
  std::vector<double> col_totals() const;
  CrossTab reversed_rows() const;
  CrossTab reversed_cols() const;
  /// Named columns in the given order; throws DataError on an unknown name.
  CrossTab select_columns(const std::vector<std::string>& names) const;
  Table to_table(std::string name = "crosstab") const;
};

CrossTab crosstab(std::span<const std::pair<std::string, std::string>> pairs, std::vector<std::string> row_categories,
                  std::vector<std::string> col_categories);
CrossTab crosstab_from_counts(std::vector<std::string> rows, std::vector<std::string> cols,
                              std::vector<std::vector<double>> counts);
/// First column holds row categories, remaining header cells the column
/// categories, cells the counts.
CrossTab crosstab_from_table(const Table& table);
CrossTab load_crosstab(const std::filesystem::path& path);

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t df = 0;
  double p = 1.0;
};

/// Pearson goodness of fit; reference proportions are renormalized.
ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> reference);
/// Each row against the pooled column totals.
std::vector<ChiSquareResult> per_row_gof(const CrossTab& table);
ChiSquareResult chi_square_independence(const CrossTab& table);
/// Upper tail of the chi-squared distribution.
double chi_square_sf(double statistic, std::size_t df);

/// row, statistic, df, p
Table gof_table(const CrossTab& table, const std::vector<ChiSquareResult>& results);

struct SpearmanResult {
  double rho = 0.0;
  double p = 1.0;
  double n = 0.0;
};

/// Tie-corrected Spearman correlation with rows and columns taken as ordered
/// scales; p from the t approximation with n - 2 degrees of freedom.
SpearmanResult spearman_rho(const CrossTab& table);
SpearmanResult spearman_rho(std::span<const double> x, std::span<const double> y);

struct WeightScheme {
  std::string id;
  std::string axis;
  std::map<std::string, double> category_weight;
  std::vector<double> respondent_weights;  // 0 for excluded respondents
  std::size_t excluded = 0;

  double weight_for(const std::string& category) const;
  Table to_table() const;
};

/// Single-axis post-stratification: weight = target share / sample share over
/// respondents whose category appears in the target. Everyone else gets 0.
WeightScheme poststratification_weights(std::span<const std::string> categories, const std::string& axis,
                                        const std::map<std::string, double>& target);
WeightScheme poststratification_weights(std::span<const ResponseRecord> records, const std::string& axis,
                                        const std::map<std::string, double>& target);

Distribution weighted_tally(std::span<const ResponseRecord> records, const WeightScheme& scheme,
                            const Question& question);

}  // namespace pbf
