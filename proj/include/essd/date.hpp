#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace essd {

// Calendar date with day granularity, stored as days since 1970-01-01.
// All window arithmetic in the pipeline is whole days.
struct Date {
  std::int32_t days = 0;

  friend auto operator<=>(const Date&, const Date&) = default;

  Date operator+(std::int32_t d) const { return Date{days + d}; }
  Date operator-(std::int32_t d) const { return Date{days - d}; }
  std::int32_t operator-(const Date& o) const { return days - o.days; }
};

namespace detail {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
inline std::int32_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

inline void civil_from_days(std::int32_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yr + (m <= 2);
}

inline bool is_leap(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline unsigned days_in_month(int y, unsigned m) {
  static constexpr unsigned lengths[] = {31, 28, 31, 30, 31, 30,
                                         31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace detail

inline Date make_date(int year, unsigned month, unsigned day) {
  return Date{detail::days_from_civil(year, month, day)};
}

inline int year_of(Date d) {
  int y;
  unsigned m, dd;
  detail::civil_from_days(d.days, y, m, dd);
  return y;
}

// Parses a strict ISO-8601 calendar date (YYYY-MM-DD).
inline std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto digits = [](std::string_view t) {
    for (char c : t)
      if (c < '0' || c > '9') return false;
    return true;
  };
  if (!digits(s.substr(0, 4)) || !digits(s.substr(5, 2)) ||
      !digits(s.substr(8, 2)))
    return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  std::from_chars(s.data(), s.data() + 4, y);
  std::from_chars(s.data() + 5, s.data() + 7, m);
  std::from_chars(s.data() + 8, s.data() + 10, d);
  if (m < 1 || m > 12) return std::nullopt;
  if (d < 1 || d > detail::days_in_month(y, m)) return std::nullopt;
  return make_date(y, m, d);
}

inline std::string to_iso(Date date) {
  int y;
  unsigned m, d;
  detail::civil_from_days(date.days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
  return std::string(buf);
}

}  // namespace essd
