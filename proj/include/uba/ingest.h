#ifndef UBA_INGEST_H_
#define UBA_INGEST_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uba/log_record.h"

namespace uba {

// Column positions of the fields the pipeline reads. All other columns are
// carried through untouched in LogRecord::raw_line.
struct ColumnLayout {
  std::size_t column_count = 42;
  std::optional<std::size_t> log_id = 0;
  std::size_t user_id = 1;
  std::size_t timestamp = 2;
  std::size_t match_rule = 3;
  std::size_t signature_check = 4;
  std::size_t device_check = 5;
  std::size_t device_signature = 6;
  char delimiter = ',';

  bool operator==(const ColumnLayout&) const = default;
};

// {column_count, delimiter, columns: {log_id?, user_id, timestamp, ...}}
nlohmann::json LayoutToJson(const ColumnLayout& layout);
// Throws FormatError on missing keys or out-of-range indices.
ColumnLayout LayoutFromJson(const nlohmann::json& doc);
ColumnLayout LoadLayout(const std::filesystem::path& path);

// Maps a device signature (user-agent text) to one of the known browser names
// using ordered substring rules; "UNKNOWN" when no rule matches.
std::string ExtractBrowser(std::string_view device_signature);

inline constexpr std::string_view kUnknownBrowser = "UNKNOWN";

// Parses one line. `line_number` and `source` are used for the record_ref
// fallback and for error messages. Throws ParseError.
LogRecord ParseLogLine(std::string_view line, const ColumnLayout& layout,
                       std::size_t line_number = 0,
                       std::string_view source = {});

// Per-user, timestamp-sorted record sequences. Immutable once built.
class UserStore {
 public:
  using Records = std::vector<LogRecord>;

  UserStore() = default;

  const std::map<std::string, Records>& users() const { return users_; }
  std::size_t user_count() const { return users_.size(); }
  std::size_t total_record_count() const { return total_; }

  // Throws InvalidInputError for an unknown user.
  const Records& records(const std::string& user_id) const;
  bool contains(const std::string& user_id) const {
    return users_.contains(user_id);
  }

  bool operator==(const UserStore&) const = default;

 private:
  friend class UserStoreBuilder;
  std::map<std::string, Records> users_;
  std::size_t total_ = 0;
};

// Accumulates records one at a time and produces a UserStore. Records with
// equal timestamps keep their arrival order.
class UserStoreBuilder {
 public:
  void Add(LogRecord record);
  // Appends every record of `other`, in its arrival order.
  void Merge(UserStoreBuilder&& other);
  UserStore Finish() &&;

 private:
  std::map<std::string, UserStore::Records> users_;
  std::size_t total_ = 0;
};

UserStore GroupByUser(std::vector<LogRecord> records);

// Users with lo <= record count <= hi, ordered by user id. Throws
// InvalidInputError when lo > hi.
std::vector<std::string> SelectUsersByFrequency(const UserStore& store,
                                                std::size_t lo, std::size_t hi);

enum class ParseMode { kLenient, kStrict };

struct IngestOptions {
  ParseMode mode = ParseMode::kLenient;
  // Strict mode fails when more than this fraction of lines is malformed.
  double max_malformed_fraction = 0.5;
  std::size_t jobs = 1;
  // Issues kept verbatim in IngestStats; the counters are always complete.
  std::size_t max_reported_issues = 100;
};

struct IngestIssue {
  std::string source;
  std::size_t line = 0;
  std::string message;
};

struct IngestStats {
  std::size_t lines = 0;  // non-empty lines read
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::size_t bad_timestamp = 0;
  std::size_t consistency_violations = 0;
  std::vector<IngestIssue> issues;

  std::size_t skipped() const { return malformed + bad_timestamp; }
};

struct IngestResult {
  UserStore store;
  IngestStats stats;
};

// Parses every file (in parallel across files) and groups the records by
// user. Bad lines are skipped and counted. In strict mode a DataQualityError
// is thrown when the skipped fraction exceeds max_malformed_fraction. Throws
// IoError for unreadable files.
IngestResult IngestFiles(const std::vector<std::filesystem::path>& paths,
                         const ColumnLayout& layout,
                         const IngestOptions& options = {});

struct ManifestEntry {
  std::string user_id;
  std::string file;
  std::size_t count = 0;
  std::string first_timestamp;
  std::string last_timestamp;
};

// Writes <dir>/layout.json, <dir>/manifest.csv and one record file per user
// under <dir>/users/. Record files hold "record_ref,raw_line" CSV rows.
std::vector<ManifestEntry> SaveUserStore(const UserStore& store,
                                         const ColumnLayout& layout,
                                         const std::filesystem::path& dir);

// Reads a directory written by SaveUserStore. Throws IoError / FormatError.
UserStore LoadUserStore(const std::filesystem::path& dir);
ColumnLayout LoadUserStoreLayout(const std::filesystem::path& dir);

}  // namespace uba

#endif  // UBA_INGEST_H_
