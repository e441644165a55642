#include "uba/ingest.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <utility>

#include "uba/csv.h"
#include "uba/parallel.h"
#include "uba/status.h"
#include "uba/timestamp.h"

namespace uba {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct BrowserRule {
  std::string_view needle;
  std::string_view browser;
};

// Order matters: several user agents carry the tokens of the engines they
// imitate (Opera and Chrome both say "Safari/", SeaMonkey says "Firefox/").
constexpr std::array<BrowserRule, 11> kBrowserRules = {{
    {"SeaMonkey", "SeaMonkey"},
    {"PlayStation Portable", "PSP"},
    {"PSP", "PSP"},
    {"Opera", "Opera"},
    {"OPR/", "Opera"},
    {"MSIE", "Internet Explorer"},
    {"Trident/", "Internet Explorer"},
    {"Chrome/", "Chrome"},
    {"Android", "Android"},
    {"Firefox/", "Firefox"},
    {"Safari/", "Safari"},
}};

std::string Sanitize(std::string_view text) {
  std::string out(text.substr(0, 200));
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

void CheckColumn(std::size_t index, std::size_t column_count,
                 const char* name) {
  if (index >= column_count) {
    throw FormatError(std::string("layout column ") + name + " = " +
                      std::to_string(index) + " exceeds column_count");
  }
}

struct ShardResult {
  UserStoreBuilder builder;
  IngestStats stats;
};

void NoteIssue(IngestStats& stats, std::size_t max_issues, std::string source,
               std::size_t line, std::string message) {
  if (stats.issues.size() < max_issues) {
    stats.issues.push_back({std::move(source), line, std::move(message)});
  }
}

ShardResult IngestOne(const fs::path& path, const ColumnLayout& layout,
                      const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  ShardResult shard;
  const std::string source = path.filename().string();
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    ++shard.stats.lines;
    try {
      LogRecord record = ParseLogLine(line, layout, line_number, source);
      if (record.consistency_violation()) ++shard.stats.consistency_violations;
      shard.builder.Add(std::move(record));
      ++shard.stats.parsed;
    } catch (const ParseError& e) {
      if (e.kind() == ParseError::Kind::kBadTimestamp) {
        ++shard.stats.bad_timestamp;
      } else {
        ++shard.stats.malformed;
      }
      NoteIssue(shard.stats, options.max_reported_issues, source, line_number,
                e.what());
    }
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return shard;
}

}  // namespace

json LayoutToJson(const ColumnLayout& layout) {
  json columns{{"user_id", layout.user_id},
               {"timestamp", layout.timestamp},
               {"match_rule", layout.match_rule},
               {"signature_check", layout.signature_check},
               {"device_check", layout.device_check},
               {"device_signature", layout.device_signature}};
  if (layout.log_id) columns["log_id"] = *layout.log_id;
  return json{{"column_count", layout.column_count},
              {"delimiter", std::string(1, layout.delimiter)},
              {"columns", std::move(columns)}};
}

ColumnLayout LayoutFromJson(const json& doc) {
  try {
    ColumnLayout layout;
    layout.column_count = doc.at("column_count").get<std::size_t>();
    const auto delimiter = doc.value("delimiter", std::string(","));
    if (delimiter.size() != 1 || delimiter == "\"") {
      throw FormatError("delimiter must be a single non-quote character");
    }
    layout.delimiter = delimiter.front();
    const json& c = doc.at("columns");
    layout.user_id = c.at("user_id").get<std::size_t>();
    layout.timestamp = c.at("timestamp").get<std::size_t>();
    layout.match_rule = c.at("match_rule").get<std::size_t>();
    layout.signature_check = c.at("signature_check").get<std::size_t>();
    layout.device_check = c.at("device_check").get<std::size_t>();
    layout.device_signature = c.at("device_signature").get<std::size_t>();
    layout.log_id.reset();
    if (c.contains("log_id")) layout.log_id = c.at("log_id").get<std::size_t>();

    const std::size_t n = layout.column_count;
    CheckColumn(layout.user_id, n, "user_id");
    CheckColumn(layout.timestamp, n, "timestamp");
    CheckColumn(layout.match_rule, n, "match_rule");
    CheckColumn(layout.signature_check, n, "signature_check");
    CheckColumn(layout.device_check, n, "device_check");
    CheckColumn(layout.device_signature, n, "device_signature");
    if (layout.log_id) CheckColumn(*layout.log_id, n, "log_id");
    return layout;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad layout document: ") + e.what());
  }
}

ColumnLayout LoadLayout(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read layout " + path.string());
  try {
    return LayoutFromJson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError("layout " + path.string() + ": " + e.what());
  }
}

std::string ExtractBrowser(std::string_view device_signature) {
  for (const BrowserRule& rule : kBrowserRules) {
    if (device_signature.find(rule.needle) != std::string_view::npos) {
      return std::string(rule.browser);
    }
  }
  return std::string(kUnknownBrowser);
}

LogRecord ParseLogLine(std::string_view line, const ColumnLayout& layout,
                       std::size_t line_number, std::string_view source) {
  std::vector<std::string> fields;
  try {
    fields = SplitCsvLine(line, layout.delimiter);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), std::string(e.what()), line_number);
  }
  if (fields.size() != layout.column_count) {
    throw ParseError(ParseError::Kind::kMalformedLine,
                     "expected " + std::to_string(layout.column_count) +
                         " columns, got " + std::to_string(fields.size()),
                     line_number);
  }
  LogRecord record;
  record.user_id = std::move(fields[layout.user_id]);
  if (record.user_id.empty()) {
    throw ParseError(ParseError::Kind::kMalformedLine, "empty user id",
                     line_number);
  }
  try {
    const Timestamp ts = ParseTimestamp(fields[layout.timestamp]);
    record.timestamp = ts.instant;
    record.day_of_week = ts.day_of_week;
    record.hour_of_day = ts.hour_of_day;
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), Sanitize(e.what()), line_number);
  }
  record.match_rule = std::move(fields[layout.match_rule]);
  record.signature_check = std::move(fields[layout.signature_check]);
  record.device_check = std::move(fields[layout.device_check]);
  record.device_signature = std::move(fields[layout.device_signature]);
  record.browser = ExtractBrowser(record.device_signature);
  if (layout.log_id && !fields[*layout.log_id].empty()) {
    record.record_ref = std::move(fields[*layout.log_id]);
  } else {
    record.record_ref = std::string(source) + ":" + std::to_string(line_number);
  }
  record.raw_line.assign(line);
  if (!record.raw_line.empty() && record.raw_line.back() == '\r') {
    record.raw_line.pop_back();
  }
  return record;
}

const UserStore::Records& UserStore::records(const std::string& user_id) const {
  auto it = users_.find(user_id);
  if (it == users_.end()) throw InvalidInputError("unknown user " + user_id);
  return it->second;
}

void UserStoreBuilder::Add(LogRecord record) {
  std::string key = record.user_id;
  users_[std::move(key)].push_back(std::move(record));
  ++total_;
}

void UserStoreBuilder::Merge(UserStoreBuilder&& other) {
  for (auto& [user, records] : other.users_) {
    auto& mine = users_[user];
    if (mine.empty()) {
      mine = std::move(records);
    } else {
      mine.insert(mine.end(), std::make_move_iterator(records.begin()),
                  std::make_move_iterator(records.end()));
    }
  }
  total_ += other.total_;
  other.users_.clear();
  other.total_ = 0;
}

UserStore UserStoreBuilder::Finish() && {
  for (auto& [user, records] : users_) {
    std::stable_sort(records.begin(), records.end(),
                     [](const LogRecord& a, const LogRecord& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  UserStore store;
  store.users_ = std::move(users_);
  store.total_ = total_;
  users_.clear();
  total_ = 0;
  return store;
}

UserStore GroupByUser(std::vector<LogRecord> records) {
  UserStoreBuilder builder;
  for (LogRecord& r : records) builder.Add(std::move(r));
  return std::move(builder).Finish();
}

std::vector<std::string> SelectUsersByFrequency(const UserStore& store,
                                                std::size_t lo,
                                                std::size_t hi) {
  if (lo > hi) {
    throw InvalidInputError("invalid frequency range " + std::to_string(lo) +
                            ":" + std::to_string(hi));
  }
  std::vector<std::string> out;
  for (const auto& [user, records] : store.users()) {
    if (records.size() >= lo && records.size() <= hi) out.push_back(user);
  }
  return out;
}

IngestResult IngestFiles(const std::vector<fs::path>& paths,
                         const ColumnLayout& layout,
                         const IngestOptions& options) {
  std::vector<ShardResult> shards(paths.size());
  ParallelFor(paths.size(), options.jobs, [&](std::size_t i) {
    shards[i] = IngestOne(paths[i], layout, options);
  });

  UserStoreBuilder builder;
  IngestStats stats;
  for (ShardResult& shard : shards) {
    builder.Merge(std::move(shard.builder));
    stats.lines += shard.stats.lines;
    stats.parsed += shard.stats.parsed;
    stats.malformed += shard.stats.malformed;
    stats.bad_timestamp += shard.stats.bad_timestamp;
    stats.consistency_violations += shard.stats.consistency_violations;
    for (IngestIssue& issue : shard.stats.issues) {
      if (stats.issues.size() < options.max_reported_issues) {
        stats.issues.push_back(std::move(issue));
      }
    }
  }
  if (options.mode == ParseMode::kStrict && stats.lines > 0 &&
      static_cast<double>(stats.skipped()) >
          options.max_malformed_fraction * static_cast<double>(stats.lines)) {
    throw DataQualityError(std::to_string(stats.skipped()) + " of " +
                           std::to_string(stats.lines) +
                           " lines could not be parsed");
  }
  return {std::move(builder).Finish(), std::move(stats)};
}

std::vector<ManifestEntry> SaveUserStore(const UserStore& store,
                                         const ColumnLayout& layout,
                                         const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "users", ec);
  if (ec) throw IoError("cannot create " + (dir / "users").string());

  {
    std::ofstream out(dir / "layout.json");
    if (!out) throw IoError("cannot write " + (dir / "layout.json").string());
    out << LayoutToJson(layout).dump(2) << '\n';
  }

  std::vector<ManifestEntry> manifest;
  std::size_t index = 0;
  for (const auto& [user, records] : store.users()) {
    char name[32];
    std::snprintf(name, sizeof(name), "u%06zu.csv", index++);
    ManifestEntry entry{user, std::string("users/") + name, records.size(), "",
                        ""};
    if (!records.empty()) {
      entry.first_timestamp = FormatTimestamp(records.front().timestamp);
      entry.last_timestamp = FormatTimestamp(records.back().timestamp);
    }
    std::ofstream out(dir / entry.file);
    if (!out) throw IoError("cannot write " + (dir / entry.file).string());
    for (const LogRecord& r : records) {
      out << QuoteCsvField(r.record_ref) << ',' << QuoteCsvField(r.raw_line)
          << '\n';
    }
    if (!out) throw IoError("write failure on " + (dir / entry.file).string());
    manifest.push_back(std::move(entry));
  }

  std::ofstream out(dir / "manifest.csv");
  if (!out) throw IoError("cannot write " + (dir / "manifest.csv").string());
  out << "user_id,file,count,first_timestamp,last_timestamp\n";
  for (const ManifestEntry& e : manifest) {
    out << QuoteCsvField(e.user_id) << ',' << e.file << ',' << e.count << ','
        << e.first_timestamp << ',' << e.last_timestamp << '\n';
  }
  if (!out) throw IoError("write failure on " + (dir / "manifest.csv").string());
  return manifest;
}

ColumnLayout LoadUserStoreLayout(const fs::path& dir) {
  return LoadLayout(dir / "layout.json");
}

UserStore LoadUserStore(const fs::path& dir) {
  const ColumnLayout layout = LoadUserStoreLayout(dir);
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw IoError("cannot read " + (dir / "manifest.csv").string());

  UserStoreBuilder builder;
  std::string line;
  std::getline(manifest, line);  // header
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto cols = SplitCsvLine(line);
    if (cols.size() != 5) throw FormatError("bad manifest row: " + line);
    const fs::path file = dir / cols[1];
    std::ifstream in(file);
    if (!in) throw IoError("cannot read " + file.string());
    std::string row;
    std::size_t line_number = 0;
    std::size_t count = 0;
    while (std::getline(in, row)) {
      ++line_number;
      if (row.empty()) continue;
      std::vector<std::string> parts;
      try {
        parts = SplitCsvLine(row);
      } catch (const ParseError& e) {
        throw FormatError(file.string() + ":" + std::to_string(line_number) +
                          ": " + e.what());
      }
      if (parts.size() != 2) {
        throw FormatError(file.string() + ":" + std::to_string(line_number) +
                          ": expected record_ref,raw_line");
      }
      LogRecord record;
      try {
        record = ParseLogLine(parts[1], layout, line_number);
      } catch (const ParseError& e) {
        throw FormatError(file.string() + ":" + std::to_string(line_number) +
                          ": " + e.what());
      }
      record.record_ref = std::move(parts[0]);
      if (record.user_id != cols[0]) {
        throw FormatError(file.string() + " holds records of another user");
      }
      builder.Add(std::move(record));
      ++count;
    }
    if (count != std::stoull(cols[2])) {
      throw FormatError(file.string() + " record count disagrees with manifest");
    }
  }
  return std::move(builder).Finish();
}

}  // namespace uba
