#pragma once

#include <compare>
#include <cstdio>
#include <string>

#include "ealpha/errors.hpp"

namespace ealpha {

/// Calendar month, the panel's time unit. Totally ordered; consecutive
/// months differ by one serial step.
struct MonthIndex {
  int year = 0;
  int month = 1;  // 1..12

  auto operator<=>(const MonthIndex&) const = default;

  int serial() const { return year * 12 + (month - 1); }

  static MonthIndex from_serial(int s) {
    MonthIndex m;
    m.year = s / 12;
    m.month = s - m.year * 12 + 1;
    if (m.month < 1) {  // negative serials
      m.month += 12;
      m.year -= 1;
    }
    return m;
  }

  MonthIndex next() const { return from_serial(serial() + 1); }

  std::string str() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
  }

  /// Parses "YYYY-MM".
  static MonthIndex parse(const std::string& text) {
    int y = 0, m = 0;
    char trailing = 0;
    if (std::sscanf(text.c_str(), "%d-%d%c", &y, &m, &trailing) != 2 || m < 1 || m > 12) {
      fail(ErrorCode::parse, "bad month '" + text + "', expected YYYY-MM");
    }
    return MonthIndex{y, m};
  }
};

}  // namespace ealpha
