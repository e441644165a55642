#include "uba/eval.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "uba/csv.h"
#include "uba/parallel.h"
#include "uba/random.h"
#include "uba/status.h"

namespace uba {
namespace {

std::optional<double> Ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ShortestDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

TrialResult Skip(const std::string& user_id, std::string reason) {
  TrialResult r;
  r.user_id = user_id;
  r.skipped = true;
  r.skip_reason = std::move(reason);
  return r;
}

// `count` distinct values from [0, n), ascending (Floyd's algorithm).
std::vector<std::size_t> SampleDistinct(std::size_t n, std::size_t count,
                                        Rng& rng) {
  std::set<std::size_t> chosen;
  for (std::size_t j = n - count; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.UniformInt(j + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace

MetricsReport ComputeMetrics(const ConfusionMatrix& cm) {
  MetricsReport m;
  m.tp_rate = Ratio(cm.tp, cm.tp + cm.fn);
  m.fp_rate = Ratio(cm.fp, cm.fp + cm.tn);
  m.precision = Ratio(cm.tp, cm.tp + cm.fp);
  m.recall = Ratio(cm.tp, cm.tp + cm.fn);
  m.accuracy = Ratio(cm.tp + cm.tn, cm.total());
  return m;
}

void ExperimentConfig::Validate() const {
  if (system_ids.empty()) throw InvalidInputError("no systems selected");
  for (int id : system_ids) {
    if (id < kMinSystemId || id > kMaxSystemId) {
      throw InvalidInputError("system id must be in 1..7, got " +
                              std::to_string(id));
    }
  }
  if (runs < 1) throw InvalidInputError("runs must be at least 1");
  if (test_self < 1) throw InvalidInputError("test_self must be at least 1");
  if (test_other < 1) throw InvalidInputError("test_other must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidInputError("threshold must lie in (0, 1)");
  }
  if (tree_count < 1) throw InvalidInputError("tree_count must be at least 1");
  if (sample_size < 2) throw InvalidInputError("sample_size must be at least 2");
  if (band_lo > band_hi) throw InvalidInputError("band lo exceeds band hi");
}

CorpusIndex::CorpusIndex(const UserStore& store) : store_(&store) {
  records_.reserve(store.total_record_count());
  for (const auto& [user, records] : store.users()) {
    const std::size_t begin = records_.size();
    for (const LogRecord& r : records) records_.push_back(&r);
    ranges_[user] = {begin, records_.size()};
  }
}

std::pair<std::size_t, std::size_t> CorpusIndex::range(
    const std::string& user_id) const {
  auto it = ranges_.find(user_id);
  if (it == ranges_.end()) throw InvalidInputError("unknown user " + user_id);
  return it->second;
}

std::uint64_t TrialSeed(std::uint64_t master_seed, std::size_t run,
                        const std::string& user_id) {
  return DeriveSeed(master_seed, {run, Fnv1a(user_id)});
}

TrialResult RunUserTrial(const std::string& user_id, const CorpusIndex& corpus,
                         int system_id, const ExperimentConfig& config,
                         std::uint64_t run_seed) {
  if (!corpus.store().contains(user_id)) {
    return Skip(user_id, "unknown user");
  }
  const auto& own = corpus.store().records(user_id);
  if (own.size() <= config.test_self) {
    return Skip(user_id, "only " + std::to_string(own.size()) +
                             " records, need more than " +
                             std::to_string(config.test_self));
  }
  const auto [begin, end] = corpus.range(user_id);
  const std::size_t others = corpus.size() - (end - begin);
  if (others < config.test_other) {
    return Skip(user_id, "only " + std::to_string(others) +
                             " foreign records, need " +
                             std::to_string(config.test_other));
  }

  // Random partition of the user's records: the first test_self positions of
  // the shuffled order are the own test set.
  Rng split_rng(DeriveSeed(run_seed, {0}));
  std::vector<std::size_t> order(own.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[split_rng.UniformInt(i)]);
  }
  std::vector<std::size_t> test_idx(order.begin(),
                                    order.begin() + config.test_self);
  std::vector<std::size_t> train_idx(order.begin() + config.test_self,
                                     order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<LogRecord> training;
  training.reserve(train_idx.size());
  for (std::size_t i : train_idx) training.push_back(own[i]);

  TrainParams params;
  params.tree_count = config.tree_count;
  params.sample_size = config.sample_size;
  params.seed = DeriveSeed(run_seed, {1});
  UserModel model;
  try {
    model = TrainUserModel(user_id, training, BuildSchema(system_id), params,
                           config.threshold);
  } catch (const InsufficientDataError& e) {
    return Skip(user_id, e.what());
  }

  Rng foreign_rng(DeriveSeed(run_seed, {2}));
  std::vector<std::size_t> foreign =
      SampleDistinct(others, config.test_other, foreign_rng);
  for (std::size_t& p : foreign) {
    if (p >= begin) p += end - begin;
  }

  TrialResult result;
  result.user_id = user_id;
  auto score = [&](const LogRecord& record, TrueClass cls) {
    ScoredRecord scored;
    scored.true_class = cls;
    try {
      const Verdict v = Classify(model, record);
      scored.score = v.score;
      scored.label = v.label;
      const bool anomalous = v.label == Label::kAnomalous;
      if (cls == TrueClass::kOwn) {
        ++(anomalous ? result.cm.fn : result.cm.tp);
      } else {
        ++(anomalous ? result.cm.tn : result.cm.fp);
      }
    } catch (const Error& e) {
      scored.error = e.what();
      ++result.errors;
    }
    if (config.keep_verdicts) {
      scored.user_id = user_id;
      scored.record_ref = record.record_ref;
      result.verdicts.push_back(std::move(scored));
    }
  };
  for (std::size_t i : test_idx) score(own[i], TrueClass::kOwn);
  for (std::size_t p : foreign) score(corpus.at(p), TrueClass::kForeign);
  return result;
}

TrialResult RunUserTrial(const std::string& user_id, const UserStore& store,
                         int system_id, const ExperimentConfig& config,
                         std::uint64_t run_seed) {
  return RunUserTrial(user_id, CorpusIndex(store), system_id, config,
                      run_seed);
}

ExperimentReport RunExperiment(const UserStore& store,
                               const ExperimentConfig& config) {
  config.Validate();
  ExperimentReport report;
  report.users = SelectUsersByFrequency(store, config.band_lo, config.band_hi);
  const CorpusIndex corpus(store);
  const std::size_t user_count = report.users.size();

  for (int system_id : config.system_ids) {
    std::vector<TrialResult> trials(config.runs * user_count);
    ParallelFor(trials.size(), config.jobs, [&](std::size_t k) {
      const std::size_t run = k / user_count;
      const std::string& user = report.users[k % user_count];
      trials[k] = RunUserTrial(user, corpus, system_id, config,
                               TrialSeed(config.master_seed, run, user));
    });

    SystemSummary summary;
    summary.system_id = system_id;
    std::array<double, MetricsReport::kCount> run_sum{};
    std::array<std::size_t, MetricsReport::kCount> run_defined{};
    for (std::size_t run = 0; run < config.runs; ++run) {
      std::array<double, MetricsReport::kCount> user_sum{};
      std::array<std::size_t, MetricsReport::kCount> user_defined{};
      std::vector<std::uint64_t> own_anomalies;
      std::vector<std::vector<ScoredRecord>>* verdicts = nullptr;
      if (config.keep_verdicts) {
        auto& by_run = report.verdicts[system_id];
        by_run.resize(config.runs);
        verdicts = &by_run;
      }
      for (std::size_t u = 0; u < user_count; ++u) {
        TrialResult& trial = trials[run * user_count + u];
        if (trial.skipped) {
          ++summary.skipped;
          report.skips.push_back(
              {system_id, run, trial.user_id, trial.skip_reason});
          continue;
        }
        ++summary.trials;
        summary.record_errors += trial.errors;
        summary.pooled += trial.cm;
        own_anomalies.push_back(trial.own_anomalous());
        const auto values = ComputeMetrics(trial.cm).values();
        for (std::size_t m = 0; m < MetricsReport::kCount; ++m) {
          if (values[m]) {
            user_sum[m] += *values[m];
            ++user_defined[m];
          } else {
            ++summary.excluded[m];
          }
        }
        if (verdicts) {
          auto& dest = (*verdicts)[run];
          dest.insert(dest.end(), std::make_move_iterator(trial.verdicts.begin()),
                      std::make_move_iterator(trial.verdicts.end()));
        }
      }
      for (std::size_t m = 0; m < MetricsReport::kCount; ++m) {
        if (user_defined[m] > 0) {
          run_sum[m] += user_sum[m] / static_cast<double>(user_defined[m]);
          ++run_defined[m];
        }
      }
      summary.own_anomalies_by_run.push_back(std::move(own_anomalies));
    }
    std::array<std::optional<double>, MetricsReport::kCount> mean;
    for (std::size_t m = 0; m < MetricsReport::kCount; ++m) {
      if (run_defined[m] > 0) {
        mean[m] = run_sum[m] / static_cast<double>(run_defined[m]);
      }
    }
    summary.mean = {mean[0], mean[1], mean[2], mean[3], mean[4]};
    report.systems.push_back(std::move(summary));
  }
  return report;
}

std::map<std::uint64_t, std::size_t> AnomalousCountHistogram(
    std::span<const std::uint64_t> own_anomaly_counts) {
  std::map<std::uint64_t, std::size_t> hist;
  for (std::uint64_t c : own_anomaly_counts) ++hist[c];
  return hist;
}

std::string FormatPercent(const std::optional<double>& value) {
  if (!value) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", *value * 100.0);
  return buf;
}

std::string FormatReportTable(const ExperimentReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %10s %10s %7s %7s\n",
                "System", "TP rate", "FP rate", "Precision", "Recall",
                "Accuracy", "Trials", "Skipped");
  out << line;
  for (const SystemSummary& s : report.systems) {
    const auto v = s.mean.values();
    std::snprintf(line, sizeof(line),
                  "%-8d %10s %10s %10s %10s %10s %7zu %7zu\n", s.system_id,
                  FormatPercent(v[0]).c_str(), FormatPercent(v[1]).c_str(),
                  FormatPercent(v[2]).c_str(), FormatPercent(v[3]).c_str(),
                  FormatPercent(v[4]).c_str(), s.trials, s.skipped);
    out << line;
  }
  return out.str();
}

std::string ReportToCsv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "system,tp_rate,fp_rate,precision,recall,accuracy,trials,skipped,"
         "record_errors,excluded_tp_rate,excluded_fp_rate,excluded_precision,"
         "excluded_recall,excluded_accuracy\n";
  for (const SystemSummary& s : report.systems) {
    out << s.system_id;
    for (const auto& v : s.mean.values()) {
      out << ',';
      if (v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
        out << buf;
      }
    }
    out << ',' << s.trials << ',' << s.skipped << ',' << s.record_errors;
    for (std::size_t e : s.excluded) out << ',' << e;
    out << '\n';
  }
  return out.str();
}

std::string HistogramToCsv(const std::map<std::uint64_t, std::size_t>& hist) {
  std::ostringstream out;
  out << "own_record_anomaly_count,users\n";
  for (const auto& [count, users] : hist) out << count << ',' << users << '\n';
  return out.str();
}

std::string VerdictsToCsv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "system,run,user,record_ref,score,label,class,error\n";
  for (const auto& [system_id, runs] : report.verdicts) {
    for (std::size_t run = 0; run < runs.size(); ++run) {
      for (const ScoredRecord& r : runs[run]) {
        out << system_id << ',' << run << ',' << QuoteCsvField(r.user_id) << ','
            << QuoteCsvField(r.record_ref) << ',';
        if (r.error.empty()) {
          out << ShortestDouble(r.score) << ',' << LabelName(r.label);
        } else {
          out << ',';
        }
        out << ',' << (r.true_class == TrueClass::kOwn ? "own" : "foreign")
            << ',' << QuoteCsvField(r.error) << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace uba
