#include "pbf/timeutil.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace pbf {

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) {
    throw std::invalid_argument("timestamp too short: '" + std::string(text) + "'");
  }
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw std::invalid_argument("malformed timestamp: '" + std::string(text) + "'");
  }
  return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw std::invalid_argument("malformed timestamp: '" + std::string(text) + "'");
  }
}

}  // namespace

bool is_date_only(std::string_view text) { return text.size() == 10; }

TimePoint parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  expect_char(text, 4, '-');
  expect_char(text, 7, '-');
  const year_month_day ymd{year{read_int(text, 0, 4)}, month{static_cast<unsigned>(read_int(text, 5, 2))},
                           day{static_cast<unsigned>(read_int(text, 8, 2))}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date: '" + std::string(text) + "'");
  }
  TimePoint tp{sys_days{ymd}};
  if (text.size() == 10) {
    return tp;
  }
  if (text[10] != 'T' && text[10] != ' ') {
    throw std::invalid_argument("malformed timestamp: '" + std::string(text) + "'");
  }
  const int hh = read_int(text, 11, 2);
  expect_char(text, 13, ':');
  const int mm = read_int(text, 14, 2);
  int ss = 0;
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    ss = read_int(text, 17, 2);
    pos = 19;
  }
  if (pos < text.size() && text[pos] == 'Z') {
    ++pos;
  }
  if (pos != text.size() || hh > 23 || mm > 59 || ss > 60) {
    throw std::invalid_argument("malformed timestamp: '" + std::string(text) + "'");
  }
  return tp + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_date(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(TimePoint tp) {
  using namespace std::chrono;
  const auto d = floor<days>(tp);
  const hh_mm_ss hms{tp - d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
  return format_date(d) + buf;
}

}  // namespace pbf
