#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace pbf {

using TimePoint = std::chrono::sys_seconds;
using Day = std::chrono::sys_days;

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS][Z]" and the same with a space
// separator. Everything is UTC. Throws std::invalid_argument.
TimePoint parse_timestamp(std::string_view text);

// True when the text carries only a calendar date.
bool is_date_only(std::string_view text);

std::string format_timestamp(TimePoint tp);  // 2020-05-15T13:45:00Z
std::string format_date(Day day);            // 2020-05-15

inline Day day_of(TimePoint tp) { return std::chrono::floor<std::chrono::days>(tp); }

}  // namespace pbf
