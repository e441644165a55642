#ifndef UBA_MODEL_H_
#define UBA_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "uba/forest.h"
#include "uba/log_record.h"
#include "uba/schema.h"

namespace uba {

inline constexpr double kDefaultThreshold = 0.80;

struct TrainParams {
  std::uint32_t tree_count = 100;
  std::uint32_t sample_size = 256;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// A user's baseline: a forest over the user's encoded records.
struct UserModel {
  std::string user_id;
  FeatureSchema schema;
  Forest forest;
  double threshold = kDefaultThreshold;
  TrainParams params;
  std::size_t training_record_count = 0;
  // Training records dropped because feature extraction failed.
  std::size_t training_skipped = 0;
};

enum class Label { kNormal, kAnomalous };

struct Verdict {
  double score = 0.0;
  Label label = Label::kNormal;
};

std::string_view LabelName(Label label);

// Anomalous iff score > threshold; a score equal to the threshold is Normal.
inline Verdict MakeVerdict(double score, double threshold) {
  return {score, score > threshold ? Label::kAnomalous : Label::kNormal};
}

// Fits the user's forest on every record that extracts under `schema`;
// records that fail extraction are skipped and counted. Throws
// InsufficientDataError when fewer than two usable records remain and
// InvalidInputError when threshold is not in (0, 1).
UserModel TrainUserModel(const std::string& user_id,
                         std::span<const LogRecord> training,
                         const FeatureSchema& schema, const TrainParams& params,
                         double threshold = kDefaultThreshold);

// Scores one record. Extraction errors (MissingFieldError,
// UnknownCategoryError) propagate to the caller.
Verdict Classify(const UserModel& model, const LogRecord& record);

// Writes model.json (forest), schema.json and meta.json into `dir` and
// returns the content hash recorded in meta.json (SHA-256 over the model and
// schema documents).
std::string SaveModelBundle(const UserModel& model,
                            const std::filesystem::path& dir);

// Throws IoError / FormatError, including on a content-hash mismatch.
UserModel LoadModelBundle(const std::filesystem::path& dir);

std::string Sha256Hex(std::string_view data);

}  // namespace uba

#endif  // UBA_MODEL_H_
