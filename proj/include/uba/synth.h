#ifndef UBA_SYNTH_H_
#define UBA_SYNTH_H_

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uba/ingest.h"
#include "uba/log_record.h"

namespace uba {

enum class Separability {
  // Every user draws from the shared global marginals.
  kLow,
  // Every user has a distinct dominant categorical profile and time habit.
  kHigh,
};

enum class CountDistribution { kUniform, kPowerLaw };

// Distribution specification for a synthetic access-log corpus. Categorical
// weights are indexed like the value lists in schema.h (kMatchRuleValues,
// kDeviceCheckValues, kBrowserValues) and must each sum to 1.
struct CorpusSpec {
  std::size_t user_count = 100;

  CountDistribution count_distribution = CountDistribution::kPowerLaw;
  std::size_t records_min = 50;
  std::size_t records_max = 15000;
  // Tail exponent of the truncated power law.
  double power_law_alpha = 1.1;

  std::array<double, 8> match_rule_weights = {0.08,  0.005, 0.30, 0.02,
                                              0.03,  0.01,  0.005, 0.55};
  std::array<double, 3> device_check_weights = {0.20, 0.10, 0.70};
  // P(Signature Check = Y | Device Check = NN). YN and YY force Y.
  double signature_yes_given_nn = 0.30;
  std::array<double, 8> browser_weights = {0.009, 0.135, 0.08, 0.740988,
                                           0.000004, 0.000004, 0.035, 0.000004};
  // Global activity profile (Monday = 0).
  std::array<double, 7> day_weights = {0.19, 0.19, 0.19, 0.19, 0.18,
                                       0.03, 0.03};
  std::array<double, 24> hour_weights = {
      0.004, 0.003, 0.003, 0.003, 0.004, 0.006, 0.012, 0.030,
      0.080, 0.110, 0.110, 0.100, 0.080, 0.100, 0.110, 0.100,
      0.070, 0.035, 0.012, 0.008, 0.006, 0.005, 0.005, 0.004};

  Separability separability = Separability::kLow;
  // High separability: probability that a categorical field takes the
  // user's dominant value instead of a uniform draw over its values.
  double profile_concentration = 0.99;
  // High separability: standard deviation (hours) around the user's
  // preferred hour.
  double hour_spread = 1.5;

  std::uint64_t seed = 0;
  // First day of the activity window (GMT) and its length.
  std::string start_date = "02/15/2014";
  int days = 89;
  // Output shards.
  std::size_t files = 1;

  // Throws InvalidInputError.
  void Validate() const;
};

nlohmann::json CorpusSpecToJson(const CorpusSpec& spec);
// Missing keys keep their defaults. Throws FormatError.
CorpusSpec CorpusSpecFromJson(const nlohmann::json& doc);
CorpusSpec LoadCorpusSpec(const std::filesystem::path& path);

// Categorical fields are ordinals into the schema value lists.
struct SyntheticRecord {
  std::uint64_t log_id = 0;
  std::uint32_t user_index = 0;
  std::chrono::sys_seconds timestamp{};
  std::uint8_t match_rule = 0;
  std::uint8_t signature_check = 0;
  std::uint8_t device_check = 0;
  std::uint8_t browser = 0;
};

struct UserProfile {
  std::string user_id;
  std::uint8_t match_rule = 0;
  std::uint8_t signature_check = 0;
  std::uint8_t device_check = 0;
  std::uint8_t browser = 0;
  int preferred_hour = 12;
};

struct Corpus {
  CorpusSpec spec;
  std::vector<UserProfile> users;
  // Ordered by (timestamp, user, draw order); log ids follow this order.
  std::vector<SyntheticRecord> records;
};

Corpus GenerateCorpus(const CorpusSpec& spec);

// Draws only the per-user record counts (the first step of GenerateCorpus).
std::vector<std::size_t> DrawRecordCounts(const CorpusSpec& spec);

ColumnLayout SyntheticLayout();

// One 42-column line in the SyntheticLayout format.
std::string RenderLogLine(const Corpus& corpus, const SyntheticRecord& record);

std::string DeviceSignatureFor(std::uint8_t browser);

// Renders and parses every record, as ingestion from files would.
std::vector<LogRecord> CorpusToRecords(const Corpus& corpus);

struct CorpusManifest {
  std::size_t users = 0;
  std::size_t total_records = 0;
  std::vector<std::string> files;
  std::uint64_t seed = 0;
};

nlohmann::json ManifestToJson(const CorpusManifest& manifest);

// Writes <dir>/corpus-NNN.log shards, <dir>/layout.json and
// <dir>/manifest.json. Throws IoError.
CorpusManifest WriteCorpus(const Corpus& corpus,
                           const std::filesystem::path& dir);

CorpusManifest GenerateCorpus(const CorpusSpec& spec,
                              const std::filesystem::path& dir);

// Fields to overwrite on injected records; unset fields keep the user's
// dominant profile value.
struct ProfileDelta {
  std::optional<std::string> match_rule;
  std::optional<std::string> signature_check;
  std::optional<std::string> device_check;
  std::optional<std::string> browser;
};

struct GroundTruthEntry {
  std::string record_ref;
  std::string user_id;
  bool injected = false;
};

// Appends `count` records for `user_id` built from the user's dominant
// profile with `delta` applied, at times drawn from the user's activity
// profile. Returns the injected records' references. Throws
// InvalidInputError for an unknown user, count < 1 or unknown values.
std::vector<GroundTruthEntry> InjectKnownAnomalies(Corpus& corpus,
                                                   const std::string& user_id,
                                                   std::size_t count,
                                                   const ProfileDelta& delta,
                                                   std::uint64_t seed);

// Every record of the users named in `injected`, flagged. Header:
// record_ref,user,injected
std::string GroundTruthToCsv(const Corpus& corpus,
                             const std::vector<GroundTruthEntry>& injected);

}  // namespace uba

#endif  // UBA_SYNTH_H_
