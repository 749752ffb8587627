#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>

namespace breather {

/// Shortest round-trip decimal text of a double; "nan"/"inf" for non-finite values.
inline std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::string format_number(const std::optional<double>& value) {
  return value ? format_number(*value) : std::string("nan");
}

}  // namespace breather
