#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace hlic {

// Shortest decimal form that round-trips an IEEE double exactly.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fixed 6-decimal formatting used by CLI output and golden files.
inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace hlic
