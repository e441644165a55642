#ifndef UBA_LOG_RECORD_H_
#define UBA_LOG_RECORD_H_

#include <chrono>
#include <string>
#include <vector>

namespace uba {

// One parsed access-log line.
struct LogRecord {
  std::string user_id;
  // Stable reference to the source line: the log-id column when the layout
  // has one, otherwise "<file>:<line>".
  std::string record_ref;
  std::chrono::sys_seconds timestamp{};
  int day_of_week = 0;
  int hour_of_day = 0;
  std::string match_rule;
  std::string signature_check;  // "Y" | "N"
  std::string device_check;     // "NN" | "YN" | "YY"
  std::string device_signature;
  std::string browser;
  // The source line as read; SplitRawFields() recovers the positional fields.
  std::string raw_line;

  // A Device Check of YN or YY implies a Signature Check of Y.
  bool consistency_violation() const {
    return (device_check == "YN" || device_check == "YY") &&
           signature_check != "Y";
  }

  bool operator==(const LogRecord&) const = default;
};

}  // namespace uba

#endif  // UBA_LOG_RECORD_H_
