#include "pbf/table.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pbf {

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw DataError("unterminated quote in line: " + std::string(line));
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string join_csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) {
      out.push_back(',');
    }
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      out += f;
      continue;
    }
    out.push_back('"');
    for (char c : f) {
      if (c == '"') {
        out.push_back('"');
      }
      out.push_back(c);
    }
    out.push_back('"');
  }
  return out;
}

std::string format_fixed(double value, int digits) {
  if (!std::isfinite(value)) {
    return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  std::string s(buf);
  // "-0.000" reads badly in tables
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, 1);
  }
  return s;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw std::invalid_argument("row width " + std::to_string(row.size()) + " does not match header width " +
                                std::to_string(header.size()) + " in table '" + name + "'");
  }
  rows.push_back(std::move(row));
}

void Table::write_csv(std::ostream& out) const {
  out << join_csv_line(header) << '\n';
  for (const auto& r : rows) {
    out << join_csv_line(r) << '\n';
  }
}

std::string Table::to_csv() const {
  std::ostringstream out;
  write_csv(out);
  return out.str();
}

std::size_t Table::column(std::string_view col) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == col) {
      return i;
    }
  }
  throw std::out_of_range("table '" + name + "' has no column '" + std::string(col) + "'");
}

Table read_csv_table(std::istream& in, std::string name) {
  Table t;
  t.name = std::move(name);
  std::string line;
  std::size_t lineno = 0;
  auto skip = [](const std::string& l) { return l.empty() || l == "\r" || l[0] == '#'; };
  do {
    if (!std::getline(in, line)) {
      throw DataError("empty table '" + t.name + "'");
    }
    ++lineno;
  } while (skip(line));
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    ++lineno;
    if (skip(line)) {
      continue;
    }
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw DataError("table '" + t.name + "' line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " + std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace pbf
