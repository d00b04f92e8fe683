#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace bpmnopt {

/// Shortest decimal text that reads back to exactly the same double.
inline std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

/// Fixed-precision decimal text, for human-facing tables.
inline std::string format_fixed(double value, int precision) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, precision);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace bpmnopt
