#ifndef UBA_TIMESTAMP_H_
#define UBA_TIMESTAMP_H_

#include <chrono>
#include <string>
#include <string_view>

namespace uba {

struct Timestamp {
  std::chrono::sys_seconds instant;
  int day_of_week = 0;  // Monday = 0 ... Sunday = 6
  int hour_of_day = 0;  // 0..23
};

// Parses "mm/dd/yyyy H:M:S" or "mm/dd/yy H:M:S" (GMT). Two-digit years map to
// 2000-2099. Throws ParseError(kBadTimestamp) on anything else.
Timestamp ParseTimestamp(std::string_view text);

// Formats as "mm/dd/yyyy HH:MM:SS", zero padded.
std::string FormatTimestamp(std::chrono::sys_seconds instant);

Timestamp MakeTimestamp(std::chrono::sys_seconds instant);

}  // namespace uba

#endif  // UBA_TIMESTAMP_H_
