#pragma once

#include <charconv>
#include <string>

namespace treegate {

// Equivalent of printf("%.17g"); 17 significant digits round-trip any double.
inline std::string format_double(double v, int significant = 17) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, significant);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

}  // namespace treegate
