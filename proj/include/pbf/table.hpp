#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pbf {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No budget-balanced, floor-respecting solution exists.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv_line(std::string_view line);
std::string join_csv_line(const std::vector<std::string>& fields);

/// Fixed-point decimal with `digits` fractional digits, no exponent.
std::string format_fixed(double value, int digits);

/// A named delimited table: header plus string cells.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;
  /// Column index by header name; throws std::out_of_range.
  std::size_t column(std::string_view name) const;
};

Table read_csv_table(std::istream& in, std::string name = {});

}  // namespace pbf
