#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace enscal {

namespace detail {

// Howard Hinnant's civil-calendar algorithms.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), m, d};
}

inline int parse_fixed_uint(std::string_view s, const std::string& what) {
  int v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("invalid " + what + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Calendar date at daily granularity, stored as days since 1970-01-01.
struct Date {
  std::int32_t serial = 0;

  friend auto operator<=>(const Date&, const Date&) = default;
  Date operator+(int days) const { return Date{serial + days}; }
  Date operator-(int days) const { return Date{serial - days}; }
  int operator-(const Date& other) const { return serial - other.serial; }
};

inline Date make_date(int year, unsigned month, unsigned day) {
  return Date{static_cast<std::int32_t>(detail::days_from_civil(year, month, day))};
}

/// Parses a strict `YYYY-MM-DD` date.
inline Date parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    throw std::invalid_argument("invalid date: '" + std::string(s) + "'");
  }
  const int y = detail::parse_fixed_uint(s.substr(0, 4), "year");
  const int m = detail::parse_fixed_uint(s.substr(5, 2), "month");
  const int d = detail::parse_fixed_uint(s.substr(8, 2), "day");
  const Date date = make_date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  const auto back = detail::civil_from_days(date.serial);
  if (back.year != y || back.month != static_cast<unsigned>(m) ||
      back.day != static_cast<unsigned>(d)) {
    throw std::invalid_argument("invalid calendar date: '" + std::string(s) + "'");
  }
  return date;
}

inline std::string format_date(Date d) {
  const auto c = detail::civil_from_days(d.serial);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
  return std::string(buf);
}

/// A calendar date plus a verbatim clock string. Forecasts are initialized
/// once daily; the cycle hour is carried through serialization untouched and
/// never used in arithmetic.
struct DateTime {
  Date date;
  std::string clock;  // "" or e.g. "12:00:00", kept exactly as ingested

  friend bool operator==(const DateTime&, const DateTime&) = default;
};

/// Parses ISO-8601 `YYYY-MM-DD` or `YYYY-MM-DDThh:mm:ss`. Anything after the
/// 'T' separator is validated only loosely and preserved verbatim.
inline DateTime parse_datetime(std::string_view s) {
  const auto t = s.find('T');
  if (t == std::string_view::npos) {
    return DateTime{parse_date(s), ""};
  }
  DateTime dt{parse_date(s.substr(0, t)), std::string(s.substr(t + 1))};
  if (dt.clock.empty()) {
    throw std::invalid_argument("invalid date-time: '" + std::string(s) + "'");
  }
  for (char c : dt.clock) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == ':' || c == '.' ||
          c == 'Z' || c == '+' || c == '-')) {
      throw std::invalid_argument("invalid clock in date-time: '" + std::string(s) + "'");
    }
  }
  return dt;
}

inline std::string format_datetime(const DateTime& dt) {
  std::string out = format_date(dt.date);
  if (!dt.clock.empty()) {
    out += 'T';
    out += dt.clock;
  }
  return out;
}

}  // namespace enscal
