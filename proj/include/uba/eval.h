#ifndef UBA_EVAL_H_
#define UBA_EVAL_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uba/ingest.h"
#include "uba/model.h"

namespace uba {

// Positive class = records that belong to the modeled user.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t positives() const { return tp + fn; }
  std::uint64_t negatives() const { return fp + tn; }
  std::uint64_t total() const { return tp + fp + tn + fn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

// A ratio with a zero denominator is nullopt ("undefined"), never 0.
struct MetricsReport {
  std::optional<double> tp_rate;
  std::optional<double> fp_rate;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;

  static constexpr std::size_t kCount = 5;
  static constexpr std::array<const char*, kCount> kNames = {
      "tp_rate", "fp_rate", "precision", "recall", "accuracy"};

  std::array<std::optional<double>, kCount> values() const {
    return {tp_rate, fp_rate, precision, recall, accuracy};
  }
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport ComputeMetrics(const ConfusionMatrix& cm);

struct ExperimentConfig {
  std::vector<int> system_ids = {1, 2, 3, 4, 5, 6, 7};
  std::size_t runs = 10;
  std::size_t test_self = 100;
  std::size_t test_other = 100;
  double threshold = kDefaultThreshold;
  std::uint32_t tree_count = 100;
  std::uint32_t sample_size = 256;
  std::uint64_t master_seed = 0;
  std::size_t band_lo = 501;
  std::size_t band_hi = 600;
  std::size_t jobs = 1;
  // Keep every scored test record (for the raw verdict dump).
  bool keep_verdicts = false;

  // Throws InvalidInputError.
  void Validate() const;
};

enum class TrueClass { kOwn, kForeign };

struct ScoredRecord {
  std::string user_id;    // modeled user
  std::string record_ref;
  TrueClass true_class = TrueClass::kOwn;
  double score = 0.0;
  Label label = Label::kNormal;
  std::string error;      // non-empty when the record could not be scored
};

struct TrialResult {
  std::string user_id;
  bool skipped = false;
  std::string skip_reason;
  ConfusionMatrix cm;
  // Test records dropped because feature extraction failed.
  std::size_t errors = 0;
  std::vector<ScoredRecord> verdicts;  // only when keep_verdicts

  // Own test records flagged Anomalous.
  std::uint64_t own_anomalous() const { return cm.fn; }
};

// Flat view over a store used to draw foreign test records.
class CorpusIndex {
 public:
  explicit CorpusIndex(const UserStore& store);

  const UserStore& store() const { return *store_; }
  std::size_t size() const { return records_.size(); }
  const LogRecord& at(std::size_t i) const { return *records_[i]; }
  // Contiguous [begin, end) block of `user_id` in the flat order.
  std::pair<std::size_t, std::size_t> range(const std::string& user_id) const;

 private:
  const UserStore* store_;
  std::vector<const LogRecord*> records_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> ranges_;
};

// Stable seed for one (master seed, run, user) trial; independent of user
// order and of the system being evaluated.
std::uint64_t TrialSeed(std::uint64_t master_seed, std::size_t run,
                        const std::string& user_id);

// One train/test round for one user: test_self own records are held out at
// random, the rest train the model; test_other records are drawn uniformly
// from all other users. Own Normal -> TP, own Anomalous -> FN, foreign
// Anomalous -> TN, foreign Normal -> FP. Preconditions that fail produce a
// skipped result with a reason instead of throwing.
TrialResult RunUserTrial(const std::string& user_id, const CorpusIndex& corpus,
                         int system_id, const ExperimentConfig& config,
                         std::uint64_t run_seed);
TrialResult RunUserTrial(const std::string& user_id, const UserStore& store,
                         int system_id, const ExperimentConfig& config,
                         std::uint64_t run_seed);

struct SkippedTrial {
  int system_id = 0;
  std::size_t run = 0;
  std::string user_id;
  std::string reason;
};

struct SystemSummary {
  int system_id = 0;
  // Per-user metrics averaged over users (undefined values excluded), then
  // the per-run means averaged over runs.
  MetricsReport mean;
  // Per metric: number of (user, run) trials whose value was undefined.
  std::array<std::size_t, MetricsReport::kCount> excluded{};
  std::size_t trials = 0;
  std::size_t skipped = 0;
  std::size_t record_errors = 0;
  // Own-record anomaly count per user for each run, users in id order.
  std::vector<std::vector<std::uint64_t>> own_anomalies_by_run;
  ConfusionMatrix pooled;
};

struct ExperimentReport {
  std::vector<std::string> users;
  std::vector<SystemSummary> systems;
  std::vector<SkippedTrial> skips;
  // Only when keep_verdicts: system -> run -> records.
  std::map<int, std::vector<std::vector<ScoredRecord>>> verdicts;
};

// Runs every (system, run, user) trial for users in the frequency band.
// The result does not depend on config.jobs or on completion order.
ExperimentReport RunExperiment(const UserStore& store,
                               const ExperimentConfig& config);

// own-record anomaly count -> number of users.
std::map<std::uint64_t, std::size_t> AnomalousCountHistogram(
    std::span<const std::uint64_t> own_anomaly_counts);

// Table with the five metrics as percentages (two decimals).
std::string FormatReportTable(const ExperimentReport& report);
std::string ReportToCsv(const ExperimentReport& report);
std::string HistogramToCsv(const std::map<std::uint64_t, std::size_t>& hist);
// Header: system,run,user,record_ref,score,label,class,error
std::string VerdictsToCsv(const ExperimentReport& report);

std::string FormatPercent(const std::optional<double>& value);

}  // namespace uba

#endif  // UBA_EVAL_H_
