#include "uba/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <span>
#include <sstream>

#include "uba/csv.h"
#include "uba/random.h"
#include "uba/schema.h"
#include "uba/status.h"
#include "uba/timestamp.h"

namespace uba {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kCountStream = 1;
constexpr std::uint64_t kProfileStream = 2;
constexpr std::uint64_t kUserStream = 3;

// Device Check ordinals: NN = 0, YN = 1, YY = 2. Signature: N = 0, Y = 1.
constexpr std::uint8_t kDeviceNN = 0;
constexpr std::uint8_t kSignatureY = 1;

std::size_t DrawWeighted(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.UniformDouble() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding fallthrough: last value with non-zero weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

double StandardNormal(Rng& rng) {
  const double u1 = rng.UniformOpen();
  const double u2 = rng.UniformDouble();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <std::size_t N>
void CheckWeights(const std::array<double, N>& w, const char* name) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInputError(std::string(name) + " has a negative weight");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInputError(std::string(name) + " weights sum to " +
                            std::to_string(sum) + ", expected 1");
  }
}

std::string UserId(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%06zu", index);
  return buf;
}

std::chrono::sys_days StartDay(const CorpusSpec& spec) {
  return std::chrono::floor<std::chrono::days>(
      ParseTimestamp(spec.start_date + " 00:00:00").instant);
}

template <std::size_t N>
std::uint8_t Ordinal(std::string_view value,
                     const std::array<std::string_view, N>& values,
                     const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (values[i] == value) return static_cast<std::uint8_t>(i);
  }
  throw InvalidInputError(std::string("unknown ") + what + " '" +
                          std::string(value) + "'");
}

class RecordDrawer {
 public:
  RecordDrawer(const CorpusSpec& spec, std::chrono::sys_days start)
      : spec_(spec), start_(start) {
    day_weights_.resize(static_cast<std::size_t>(spec.days));
    for (int d = 0; d < spec.days; ++d) {
      const auto wd = std::chrono::weekday{start + std::chrono::days{d}};
      day_weights_[static_cast<std::size_t>(d)] =
          spec.day_weights[wd.iso_encoding() - 1];
    }
  }

  std::chrono::sys_seconds DrawTime(const UserProfile& profile, Rng& rng) const {
    const auto day = DrawWeighted(day_weights_, rng);
    int hour;
    if (spec_.separability == Separability::kHigh) {
      const double h = profile.preferred_hour + spec_.hour_spread * StandardNormal(rng);
      hour = static_cast<int>(std::lround(h)) % 24;
      if (hour < 0) hour += 24;
    } else {
      hour = static_cast<int>(DrawWeighted(spec_.hour_weights, rng));
    }
    const auto minute = static_cast<int>(rng.UniformInt(60));
    const auto second = static_cast<int>(rng.UniformInt(60));
    return start_ + std::chrono::days{static_cast<int>(day)} +
           std::chrono::hours{hour} + std::chrono::minutes{minute} +
           std::chrono::seconds{second};
  }

  void DrawCategorical(const UserProfile& profile, Rng& rng,
                       SyntheticRecord& r) const {
    if (spec_.separability == Separability::kLow) {
      r.match_rule =
          static_cast<std::uint8_t>(DrawWeighted(spec_.match_rule_weights, rng));
      r.device_check = static_cast<std::uint8_t>(
          DrawWeighted(spec_.device_check_weights, rng));
      r.browser =
          static_cast<std::uint8_t>(DrawWeighted(spec_.browser_weights, rng));
      r.signature_check =
          r.device_check != kDeviceNN || rng.Bernoulli(spec_.signature_yes_given_nn)
              ? kSignatureY
              : 0;
      return;
    }
    // High separability: each field keeps the dominant value with
    // probability profile_concentration, otherwise it is uniform over the
    // field's values.
    auto pick = [&](std::uint8_t dominant, std::size_t cardinality) {
      if (rng.Bernoulli(spec_.profile_concentration)) return dominant;
      return static_cast<std::uint8_t>(rng.UniformInt(cardinality));
    };
    r.match_rule = pick(profile.match_rule, kMatchRuleValues.size());
    r.device_check = pick(profile.device_check, kDeviceCheckValues.size());
    r.browser = pick(profile.browser, kBrowserValues.size());
    r.signature_check = r.device_check != kDeviceNN
                            ? kSignatureY
                            : pick(profile.signature_check, 2);
  }

 private:
  const CorpusSpec& spec_;
  std::chrono::sys_days start_;
  std::vector<double> day_weights_;
};

std::vector<UserProfile> DrawProfiles(const CorpusSpec& spec) {
  Rng rng(DeriveSeed(spec.seed, {kProfileStream}));
  std::vector<UserProfile> users(spec.user_count);
  if (spec.separability == Separability::kHigh) {
    // Distinct (match rule, device, signature, browser) combinations while
    // they last.
    std::vector<UserProfile> combos;
    for (std::uint8_t mr = 0; mr < kMatchRuleValues.size(); ++mr) {
      for (std::uint8_t dev = 0; dev < kDeviceCheckValues.size(); ++dev) {
        for (std::uint8_t sig = 0; sig < 2; ++sig) {
          if (dev != kDeviceNN && sig != kSignatureY) continue;
          for (std::uint8_t br = 0; br < kBrowserValues.size(); ++br) {
            combos.push_back({"", mr, sig, dev, br, 12});
          }
        }
      }
    }
    for (std::size_t i = combos.size(); i > 1; --i) {
      std::swap(combos[i - 1], combos[rng.UniformInt(i)]);
    }
    for (std::size_t u = 0; u < users.size(); ++u) {
      users[u] = combos[u % combos.size()];
      users[u].preferred_hour = static_cast<int>(rng.UniformInt(24));
    }
  } else {
    for (UserProfile& p : users) {
      p.match_rule =
          static_cast<std::uint8_t>(DrawWeighted(spec.match_rule_weights, rng));
      p.device_check = static_cast<std::uint8_t>(
          DrawWeighted(spec.device_check_weights, rng));
      p.browser =
          static_cast<std::uint8_t>(DrawWeighted(spec.browser_weights, rng));
      p.signature_check =
          p.device_check != kDeviceNN || rng.Bernoulli(spec.signature_yes_given_nn)
              ? kSignatureY
              : 0;
      p.preferred_hour = static_cast<int>(DrawWeighted(spec.hour_weights, rng));
    }
  }
  for (std::size_t u = 0; u < users.size(); ++u) users[u].user_id = UserId(u);
  return users;
}

template <std::size_t N>
std::array<double, N> ReadWeights(const json& doc, const char* key,
                                  const std::array<double, N>& fallback) {
  if (!doc.contains(key)) return fallback;
  const auto v = doc.at(key).get<std::vector<double>>();
  if (v.size() != N) {
    throw FormatError(std::string(key) + " needs " + std::to_string(N) +
                      " weights");
  }
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

void CorpusSpec::Validate() const {
  if (user_count < 1) throw InvalidInputError("user_count must be at least 1");
  if (records_min < 1 || records_min > records_max) {
    throw InvalidInputError("records_min must be in 1..records_max");
  }
  if (count_distribution == CountDistribution::kPowerLaw &&
      !(power_law_alpha > 0.0)) {
    throw InvalidInputError("power_law_alpha must be positive");
  }
  CheckWeights(match_rule_weights, "match_rule_weights");
  CheckWeights(device_check_weights, "device_check_weights");
  CheckWeights(browser_weights, "browser_weights");
  CheckWeights(day_weights, "day_weights");
  CheckWeights(hour_weights, "hour_weights");
  if (!(signature_yes_given_nn >= 0.0 && signature_yes_given_nn <= 1.0)) {
    throw InvalidInputError("signature_yes_given_nn must be in [0, 1]");
  }
  if (!(profile_concentration >= 0.0 && profile_concentration <= 1.0)) {
    throw InvalidInputError("profile_concentration must be in [0, 1]");
  }
  if (!(hour_spread >= 0.0)) throw InvalidInputError("hour_spread must be >= 0");
  if (days < 1) throw InvalidInputError("days must be at least 1");
  if (files < 1) throw InvalidInputError("files must be at least 1");
  StartDay(*this);
}

json CorpusSpecToJson(const CorpusSpec& s) {
  return json{
      {"user_count", s.user_count},
      {"count_distribution",
       s.count_distribution == CountDistribution::kUniform ? "uniform"
                                                           : "power_law"},
      {"records_min", s.records_min},
      {"records_max", s.records_max},
      {"power_law_alpha", s.power_law_alpha},
      {"match_rule_weights", s.match_rule_weights},
      {"device_check_weights", s.device_check_weights},
      {"signature_yes_given_nn", s.signature_yes_given_nn},
      {"browser_weights", s.browser_weights},
      {"day_weights", s.day_weights},
      {"hour_weights", s.hour_weights},
      {"separability", s.separability == Separability::kHigh ? "high" : "low"},
      {"profile_concentration", s.profile_concentration},
      {"hour_spread", s.hour_spread},
      {"seed", s.seed},
      {"start_date", s.start_date},
      {"days", s.days},
      {"files", s.files},
  };
}

CorpusSpec CorpusSpecFromJson(const json& doc) {
  try {
    if (!doc.is_object()) throw FormatError("corpus spec must be an object");
    CorpusSpec s;
    s.user_count = doc.value("user_count", s.user_count);
    const auto dist = doc.value("count_distribution", std::string("power_law"));
    if (dist == "uniform") {
      s.count_distribution = CountDistribution::kUniform;
    } else if (dist == "power_law") {
      s.count_distribution = CountDistribution::kPowerLaw;
    } else {
      throw FormatError("unknown count_distribution " + dist);
    }
    s.records_min = doc.value("records_min", s.records_min);
    s.records_max = doc.value("records_max", s.records_max);
    s.power_law_alpha = doc.value("power_law_alpha", s.power_law_alpha);
    s.match_rule_weights =
        ReadWeights(doc, "match_rule_weights", s.match_rule_weights);
    s.device_check_weights =
        ReadWeights(doc, "device_check_weights", s.device_check_weights);
    s.signature_yes_given_nn =
        doc.value("signature_yes_given_nn", s.signature_yes_given_nn);
    s.browser_weights = ReadWeights(doc, "browser_weights", s.browser_weights);
    s.day_weights = ReadWeights(doc, "day_weights", s.day_weights);
    s.hour_weights = ReadWeights(doc, "hour_weights", s.hour_weights);
    const auto sep = doc.value("separability", std::string("low"));
    if (sep == "low") {
      s.separability = Separability::kLow;
    } else if (sep == "high") {
      s.separability = Separability::kHigh;
    } else {
      throw FormatError("unknown separability " + sep);
    }
    s.profile_concentration =
        doc.value("profile_concentration", s.profile_concentration);
    s.hour_spread = doc.value("hour_spread", s.hour_spread);
    s.seed = doc.value("seed", s.seed);
    s.start_date = doc.value("start_date", s.start_date);
    s.days = doc.value("days", s.days);
    s.files = doc.value("files", s.files);
    s.Validate();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad corpus spec: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw FormatError(std::string("bad corpus spec: ") + e.what());
  } catch (const ParseError& e) {
    throw FormatError(std::string("bad corpus spec: ") + e.what());
  }
}

CorpusSpec LoadCorpusSpec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus spec " + path.string());
  try {
    return CorpusSpecFromJson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError("corpus spec " + path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> DrawRecordCounts(const CorpusSpec& spec) {
  spec.Validate();
  Rng rng(DeriveSeed(spec.seed, {kCountStream}));
  std::vector<std::size_t> counts(spec.user_count);
  const auto lo = static_cast<double>(spec.records_min);
  const auto hi = static_cast<double>(spec.records_max);
  for (std::size_t& c : counts) {
    if (spec.count_distribution == CountDistribution::kUniform) {
      c = spec.records_min +
          rng.UniformInt(spec.records_max - spec.records_min + 1);
    } else {
      // Inverse CDF of a Pareto law truncated to [lo, hi + 1), floored.
      const double a = spec.power_law_alpha;
      const double tail = std::pow(lo / (hi + 1.0), a);
      const double u = rng.UniformDouble();
      const double x = lo * std::pow(1.0 - u * (1.0 - tail), -1.0 / a);
      c = std::clamp(static_cast<std::size_t>(std::floor(x)), spec.records_min,
                     spec.records_max);
    }
  }
  return counts;
}

Corpus GenerateCorpus(const CorpusSpec& spec) {
  spec.Validate();
  Corpus corpus;
  corpus.spec = spec;
  corpus.users = DrawProfiles(spec);
  const std::vector<std::size_t> counts = DrawRecordCounts(spec);
  const RecordDrawer drawer(spec, StartDay(spec));

  const std::size_t total = std::accumulate(counts.begin(), counts.end(),
                                            std::size_t{0});
  corpus.records.reserve(total);
  for (std::size_t u = 0; u < spec.user_count; ++u) {
    Rng rng(DeriveSeed(spec.seed, {kUserStream, u}));
    const UserProfile& profile = corpus.users[u];
    for (std::size_t i = 0; i < counts[u]; ++i) {
      SyntheticRecord r;
      r.user_index = static_cast<std::uint32_t>(u);
      r.timestamp = drawer.DrawTime(profile, rng);
      drawer.DrawCategorical(profile, rng, r);
      corpus.records.push_back(r);
    }
  }
  std::stable_sort(corpus.records.begin(), corpus.records.end(),
                   [](const SyntheticRecord& a, const SyntheticRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    corpus.records[i].log_id = i + 1;
  }
  return corpus;
}

ColumnLayout SyntheticLayout() { return ColumnLayout{}; }

std::string DeviceSignatureFor(std::uint8_t browser) {
  static constexpr std::array<std::string_view, 8> kUserAgents = {
      // Android
      "Mozilla/5.0 (Linux; U; Android 4.1.2; en-us; GT-I9300 Build/JZO54K) "
      "AppleWebKit/534.30 (KHTML, like Gecko) Version/4.0 Mobile "
      "Safari/534.30",
      // Chrome
      "Mozilla/5.0 (Windows NT 6.1; WOW64) AppleWebKit/537.36 (KHTML, like "
      "Gecko) Chrome/33.0.1750.146 Safari/537.36",
      // Firefox
      "Mozilla/5.0 (Windows NT 6.1; rv:27.0) Gecko/20100101 Firefox/27.0",
      // Internet Explorer
      "Mozilla/4.0 (compatible; MSIE 8.0; Windows NT 6.1; Trident/4.0)",
      // Opera
      "Opera/9.80 (Windows NT 6.1) Presto/2.12.388 Version/12.16",
      // PSP
      "Mozilla/4.0 (PSP (PlayStation Portable); 2.00)",
      // Safari
      "Mozilla/5.0 (Macintosh; Intel Mac OS X 10_9_2) AppleWebKit/537.74.9 "
      "(KHTML, like Gecko) Version/7.0.2 Safari/537.74.9",
      // SeaMonkey
      "Mozilla/5.0 (Windows NT 6.1; rv:26.0) Gecko/20100101 Firefox/26.0 "
      "SeaMonkey/2.23",
  };
  return "ua=" + std::string(kUserAgents.at(browser)) +
         "|lang=en-US|tz=-300|screen=1280x1024";
}

std::string RenderLogLine(const Corpus& corpus, const SyntheticRecord& r) {
  const ColumnLayout layout = SyntheticLayout();
  std::vector<std::string> fields(layout.column_count);
  fields[*layout.log_id] = std::to_string(r.log_id);
  fields[layout.user_id] = corpus.users.at(r.user_index).user_id;
  fields[layout.timestamp] = FormatTimestamp(r.timestamp);
  fields[layout.match_rule] = std::string(kMatchRuleValues.at(r.match_rule));
  fields[layout.signature_check] =
      std::string(kSignatureCheckValues.at(r.signature_check));
  fields[layout.device_check] = std::string(kDeviceCheckValues.at(r.device_check));
  fields[layout.device_signature] = DeviceSignatureFor(r.browser);
  // Remaining columns are carried but unused by the detector.
  fields[7] = "PAYROLL";
  fields[8] = "AUTH";
  fields[9] = r.match_rule == 7 ? "ALLOW" : "CHALLENGE";
  fields[10] = std::to_string(r.log_id % 100);
  return JoinCsvLine(fields, layout.delimiter);
}

std::vector<LogRecord> CorpusToRecords(const Corpus& corpus) {
  const ColumnLayout layout = SyntheticLayout();
  std::vector<LogRecord> out;
  out.reserve(corpus.records.size());
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    out.push_back(ParseLogLine(RenderLogLine(corpus, corpus.records[i]), layout,
                               i + 1, "synthetic"));
  }
  return out;
}

json ManifestToJson(const CorpusManifest& m) {
  return json{{"users", m.users},
              {"total_records", m.total_records},
              {"files", m.files},
              {"seed", m.seed}};
}

CorpusManifest WriteCorpus(const Corpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());

  CorpusManifest manifest;
  manifest.users = corpus.users.size();
  manifest.total_records = corpus.records.size();
  manifest.seed = corpus.spec.seed;
  const std::size_t shards = corpus.spec.files;
  const std::size_t n = corpus.records.size();
  for (std::size_t k = 0; k < shards; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "corpus-%03zu.log", k);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    for (std::size_t i = k * n / shards; i < (k + 1) * n / shards; ++i) {
      out << RenderLogLine(corpus, corpus.records[i]) << '\n';
    }
    if (!out) throw IoError("write failure on " + (dir / name).string());
    manifest.files.push_back(name);
  }
  auto write_json = [&](const char* name, const json& doc) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << doc.dump(2) << '\n';
  };
  write_json("layout.json", LayoutToJson(SyntheticLayout()));
  write_json("manifest.json", ManifestToJson(manifest));
  return manifest;
}

CorpusManifest GenerateCorpus(const CorpusSpec& spec, const fs::path& dir) {
  return WriteCorpus(GenerateCorpus(spec), dir);
}

std::vector<GroundTruthEntry> InjectKnownAnomalies(Corpus& corpus,
                                                   const std::string& user_id,
                                                   std::size_t count,
                                                   const ProfileDelta& delta,
                                                   std::uint64_t seed) {
  if (count < 1) throw InvalidInputError("count must be at least 1");
  auto it = std::find_if(corpus.users.begin(), corpus.users.end(),
                         [&](const UserProfile& p) { return p.user_id == user_id; });
  if (it == corpus.users.end()) {
    throw InvalidInputError("unknown user " + user_id);
  }
  const auto user_index = static_cast<std::uint32_t>(it - corpus.users.begin());
  const UserProfile& profile = *it;

  SyntheticRecord base;
  base.user_index = user_index;
  base.match_rule = delta.match_rule
                        ? Ordinal(*delta.match_rule, kMatchRuleValues, "match rule")
                        : profile.match_rule;
  base.signature_check =
      delta.signature_check
          ? Ordinal(*delta.signature_check, kSignatureCheckValues, "signature check")
          : profile.signature_check;
  base.device_check =
      delta.device_check
          ? Ordinal(*delta.device_check, kDeviceCheckValues, "device check")
          : profile.device_check;
  base.browser = delta.browser
                     ? Ordinal(*delta.browser, kBrowserValues, "browser")
                     : profile.browser;

  std::uint64_t next_id = 1;
  for (const SyntheticRecord& r : corpus.records) {
    next_id = std::max(next_id, r.log_id + 1);
  }
  const RecordDrawer drawer(corpus.spec, StartDay(corpus.spec));
  Rng rng(seed);
  std::vector<GroundTruthEntry> injected;
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticRecord r = base;
    r.log_id = next_id++;
    r.timestamp = drawer.DrawTime(profile, rng);
    corpus.records.push_back(r);
    injected.push_back({std::to_string(r.log_id), user_id, true});
  }
  return injected;
}

std::string GroundTruthToCsv(const Corpus& corpus,
                             const std::vector<GroundTruthEntry>& injected) {
  std::set<std::string> users;
  std::set<std::string> refs;
  for (const GroundTruthEntry& e : injected) {
    users.insert(e.user_id);
    refs.insert(e.record_ref);
  }
  std::ostringstream out;
  out << "record_ref,user,injected\n";
  for (const SyntheticRecord& r : corpus.records) {
    const std::string& user = corpus.users.at(r.user_index).user_id;
    if (!users.contains(user)) continue;
    const std::string ref = std::to_string(r.log_id);
    out << ref << ',' << user << ',' << (refs.contains(ref) ? "true" : "false")
        << '\n';
  }
  return out.str();
}

}  // namespace uba
