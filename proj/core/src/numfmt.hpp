#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace flowlik::detail {

/// 17 significant digits, enough to round-trip any double.
inline std::string num17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace flowlik::detail
