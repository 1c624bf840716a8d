#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace eegtl {

/// Shortest text that reads back to the same double.
inline std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, res.ptr};
}

}  // namespace eegtl
