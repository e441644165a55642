#include "uba/timestamp.h"

#include <charconv>
#include <cstdio>
#include <string>

#include "uba/status.h"

namespace uba {
namespace {

[[noreturn]] void BadTimestamp(std::string_view text) {
  throw ParseError(ParseError::Kind::kBadTimestamp,
                   "unparseable timestamp '" + std::string(text) + "'");
}

// Reads 1..max_digits decimal digits followed by `sep` (or end of input when
// sep is '\0'). Advances `pos` past the separator.
int ReadNumber(std::string_view text, std::size_t& pos, std::size_t min_digits,
               std::size_t max_digits, char sep, std::size_t* digits_read) {
  const std::size_t start = pos;
  while (pos < text.size() && pos - start < max_digits && text[pos] >= '0' &&
         text[pos] <= '9') {
    ++pos;
  }
  const std::size_t n = pos - start;
  if (n < min_digits) BadTimestamp(text);
  int value = 0;
  std::from_chars(text.data() + start, text.data() + pos, value);
  if (sep == '\0') {
    if (pos != text.size()) BadTimestamp(text);
  } else {
    if (pos >= text.size() || text[pos] != sep) BadTimestamp(text);
    ++pos;
  }
  if (digits_read) *digits_read = n;
  return value;
}

}  // namespace

Timestamp MakeTimestamp(std::chrono::sys_seconds instant) {
  using namespace std::chrono;
  const sys_days day = floor<days>(instant);
  const hh_mm_ss<seconds> tod{instant - day};
  Timestamp ts;
  ts.instant = instant;
  ts.day_of_week = static_cast<int>(weekday{day}.iso_encoding()) - 1;
  ts.hour_of_day = static_cast<int>(tod.hours().count());
  return ts;
}

Timestamp ParseTimestamp(std::string_view text) {
  using namespace std::chrono;
  std::size_t pos = 0;
  std::size_t year_digits = 0;
  const int mm = ReadNumber(text, pos, 1, 2, '/', nullptr);
  const int dd = ReadNumber(text, pos, 1, 2, '/', nullptr);
  int yy = ReadNumber(text, pos, 2, 4, ' ', &year_digits);
  if (year_digits == 2) {
    yy += 2000;
  } else if (year_digits != 4) {
    BadTimestamp(text);
  }
  const int h = ReadNumber(text, pos, 1, 2, ':', nullptr);
  const int m = ReadNumber(text, pos, 1, 2, ':', nullptr);
  const int s = ReadNumber(text, pos, 1, 2, '\0', nullptr);
  const year_month_day ymd{year{yy}, month{static_cast<unsigned>(mm)},
                           day{static_cast<unsigned>(dd)}};
  if (!ymd.ok() || h > 23 || m > 59 || s > 59) BadTimestamp(text);
  return MakeTimestamp(sys_days{ymd} + hours{h} + minutes{m} + seconds{s});
}

std::string FormatTimestamp(std::chrono::sys_seconds instant) {
  using namespace std::chrono;
  const sys_days day = floor<days>(instant);
  const year_month_day ymd{day};
  const hh_mm_ss<seconds> tod{instant - day};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02u/%02u/%04d %02d:%02d:%02d",
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()),
                static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

}  // namespace uba
