#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "uba/csv.h"
#include "uba/ingest.h"
#include "uba/schema.h"
#include "uba/status.h"
#include "uba/synth.h"
#include "uba/timestamp.h"

namespace fs = std::filesystem;

namespace uba {
namespace {

std::string Line(const std::string& id, const std::string& user,
                 const std::string& when, const std::string& mr = "USERKNOWN",
                 const std::string& sig = "Y", const std::string& dev = "YY",
                 const std::string& ua = "Mozilla/4.0 (compatible; MSIE 8.0)",
                 std::size_t columns = 42) {
  std::vector<std::string> f(columns, "x");
  f[0] = id;
  f[1] = user;
  f[2] = when;
  f[3] = mr;
  f[4] = sig;
  f[5] = dev;
  f[6] = ua;
  return JoinCsvLine(f);
}

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("uba_ingest_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

TEST(Csv, SplitHandlesQuotes) {
  using V = std::vector<std::string>;
  EXPECT_EQ(SplitCsvLine("a,b,,c"), (V{"a", "b", "", "c"}));
  EXPECT_EQ(SplitCsvLine("\"a,b\",\"say \"\"hi\"\"\""), (V{"a,b", "say \"hi\""}));
  EXPECT_EQ(SplitCsvLine(""), V{""});
  EXPECT_EQ(SplitCsvLine("a;b", ';'), (V{"a", "b"}));
  EXPECT_THROW(SplitCsvLine("\"open"), ParseError);
  EXPECT_THROW(SplitCsvLine("\"a\"b"), ParseError);
}

TEST(Csv, JoinRoundTrips) {
  const std::vector<std::string> f = {"plain", "with,comma", "q\"uote", "", "line\nbreak"};
  EXPECT_EQ(SplitCsvLine(JoinCsvLine(f)), f);
  EXPECT_EQ(QuoteCsvField("abc"), "abc");
  EXPECT_EQ(QuoteCsvField("a,b"), "\"a,b\"");
}

TEST(ExtractBrowser, Rules) {
  EXPECT_EQ(ExtractBrowser("Mozilla/4.0 (compatible; MSIE 8.0; Windows NT 6.1)"),
            "Internet Explorer");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 (Windows NT 6.1; Trident/7.0; rv:11.0) like Gecko"),
            "Internet Explorer");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 AppleWebKit/537.36 Chrome/33.0 Safari/537.36"),
            "Chrome");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 AppleWebKit/537.36 Chrome/33.0 Safari/537.36 OPR/20.0"),
            "Opera");
  EXPECT_EQ(ExtractBrowser("Opera/9.80 (Windows NT 6.1) Presto/2.12 Version/12.16"), "Opera");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 Gecko/20100101 Firefox/27.0"), "Firefox");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 Gecko/20100101 Firefox/24.0 SeaMonkey/2.21"),
            "SeaMonkey");
  EXPECT_EQ(ExtractBrowser("Mozilla/4.0 (PlayStation Portable); 2.00"), "PSP");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 (Macintosh) AppleWebKit/537.73 Version/7.0 Safari/537.73"),
            "Safari");
  EXPECT_EQ(ExtractBrowser("Mozilla/5.0 (Linux; U; Android 4.1.2) AppleWebKit/534.30 "
                           "Version/4.0 Mobile Safari/534.30"),
            "Android");
  EXPECT_EQ(ExtractBrowser(""), "UNKNOWN");
  EXPECT_EQ(ExtractBrowser("NetFront/3.5"), "UNKNOWN");
}

TEST(ExtractBrowser, SynthesizedSignaturesRecoverTheirBrowser) {
  for (std::uint8_t b = 0; b < kBrowserValues.size(); ++b)
    EXPECT_EQ(ExtractBrowser(DeviceSignatureFor(b)), kBrowserValues[b]);
}

TEST(ParseLogLine, FieldsAndDerivedValues) {
  const auto r = ParseLogLine(Line("77", "alice", "02/15/2014 00:00:01", "DEVICEIDCHECK",
                                   "N", "NN"),
                              ColumnLayout{}, 5, "a.log");
  EXPECT_EQ(r.user_id, "alice");
  EXPECT_EQ(r.record_ref, "77");
  EXPECT_EQ(r.day_of_week, 5);
  EXPECT_EQ(r.hour_of_day, 0);
  EXPECT_EQ(r.match_rule, "DEVICEIDCHECK");
  EXPECT_EQ(r.browser, "Internet Explorer");
  EXPECT_FALSE(r.consistency_violation());
  EXPECT_EQ(SplitCsvLine(r.raw_line).size(), 42u);
}

TEST(ParseLogLine, ConsistencyViolationFlagged) {
  const auto r = ParseLogLine(Line("1", "a", "02/15/2014 00:00:01", "USERKNOWN", "N", "YY"),
                              ColumnLayout{});
  EXPECT_TRUE(r.consistency_violation());
}

TEST(ParseLogLine, ColumnCountEnforced) {
  try {
    ParseLogLine(Line("1", "a", "02/15/2014 00:00:01", "USERKNOWN", "Y", "YY", "ua", 41),
                 ColumnLayout{}, 3);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ParseError::Kind::kMalformedLine);
    EXPECT_EQ(e.line_number(), 3u);
  }
}

TEST(ParseLogLine, BadTimestampKind) {
  try {
    ParseLogLine(Line("1", "a", "2014-02-15 00:00:01"), ColumnLayout{});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ParseError::Kind::kBadTimestamp);
  }
}

TEST(ParseLogLine, RecordRefFallsBackToSourceLine) {
  ColumnLayout layout;
  layout.log_id.reset();
  const auto r = ParseLogLine(Line("1", "a", "02/15/2014 00:00:01"), layout, 12, "x.log");
  EXPECT_EQ(r.record_ref, "x.log:12");
}

TEST(Layout, JsonRoundTripAndValidation) {
  ColumnLayout l;
  l.delimiter = '|';
  l.column_count = 10;
  l.log_id.reset();
  EXPECT_EQ(LayoutFromJson(LayoutToJson(l)), l);
  EXPECT_EQ(LayoutFromJson(LayoutToJson(ColumnLayout{})), ColumnLayout{});
  auto doc = LayoutToJson(l);
  doc["columns"]["browser_signature_typo"] = 1;
  doc["columns"]["user_id"] = 10;
  EXPECT_THROW(LayoutFromJson(doc), FormatError);
  EXPECT_THROW(LayoutFromJson(nlohmann::json::object()), FormatError);
}

LogRecord At(const std::string& user, const std::string& when, const std::string& ref) {
  return ParseLogLine(Line(ref, user, when), ColumnLayout{});
}

TEST(GroupByUser, CountsAndOrdering) {
  const auto store = GroupByUser({At("A", "02/16/2014 10:00:00", "1"),
                                  At("B", "02/15/2014 10:00:00", "2"),
                                  At("A", "02/15/2014 09:00:00", "3"),
                                  At("A", "02/15/2014 09:00:00", "4"),
                                  At("B", "02/15/2014 08:00:00", "5")});
  EXPECT_EQ(store.user_count(), 2u);
  EXPECT_EQ(store.total_record_count(), 5u);
  const auto& a = store.records("A");
  ASSERT_EQ(a.size(), 3u);
  // Sorted ascending; equal timestamps keep arrival order.
  EXPECT_EQ(a[0].record_ref, "3");
  EXPECT_EQ(a[1].record_ref, "4");
  EXPECT_EQ(a[2].record_ref, "1");
  EXPECT_EQ(store.records("B")[0].record_ref, "5");
  EXPECT_THROW(store.records("C"), InvalidInputError);
}

TEST(GroupByUser, EmptyStream) {
  const auto store = GroupByUser({});
  EXPECT_EQ(store.user_count(), 0u);
  EXPECT_EQ(store.total_record_count(), 0u);
}

UserStore StoreWithCounts(const std::vector<std::pair<std::string, std::size_t>>& counts) {
  UserStoreBuilder b;
  for (const auto& [user, n] : counts) {
    LogRecord r;
    r.user_id = user;
    for (std::size_t i = 0; i < n; ++i) b.Add(r);
  }
  return std::move(b).Finish();
}

TEST(SelectUsersByFrequency, InclusiveBounds) {
  using V = std::vector<std::string>;
  EXPECT_EQ(SelectUsersByFrequency(StoreWithCounts({{"C", 600}, {"A", 501}, {"B", 600}}),
                                   501, 600),
            (V{"A", "B", "C"}));
  EXPECT_EQ(SelectUsersByFrequency(StoreWithCounts({{"A", 500}, {"B", 601}}), 501, 600), V{});
  EXPECT_THROW(SelectUsersByFrequency(UserStore{}, 10, 9), InvalidInputError);
}

TEST(SelectUsersByFrequency, PowerLawBandNearConfiguredTarget) {
  CorpusSpec spec;
  spec.user_count = 2000;
  spec.records_min = 300;
  spec.records_max = 2000;
  spec.power_law_alpha = 2.0;
  spec.seed = 5;
  const auto counts = DrawRecordCounts(spec);
  std::vector<std::pair<std::string, std::size_t>> per_user;
  for (std::size_t u = 0; u < counts.size(); ++u)
    per_user.emplace_back("u" + std::to_string(u), counts[u]);
  const auto selected = SelectUsersByFrequency(StoreWithCounts(per_user), 501, 600);

  // Truncated Pareto mass on [501, 601), from the configured parameters.
  auto cdf = [&](double x) {
    const double a = spec.power_law_alpha, lo = 300, hi = 2001;
    return (1 - std::pow(lo / x, a)) / (1 - std::pow(lo / hi, a));
  };
  const double target = spec.user_count * (cdf(601) - cdf(501));
  EXPECT_NEAR(static_cast<double>(selected.size()), target, 0.2 * target);
}

TEST(IngestFiles, ConservationAndIdempotence) {
  const auto dir = TempDir("conserve");
  std::string a, b;
  for (int i = 0; i < 30; ++i)
    a += Line(std::to_string(i), "u" + std::to_string(i % 3), "02/15/2014 10:00:00") + "\n";
  a += "not,a,valid,line\n\n";
  a += Line("99", "u1", "15.02.2014 10:00") + "\n";
  for (int i = 30; i < 40; ++i)
    b += Line(std::to_string(i), "u" + std::to_string(i % 4), "02/16/2014 10:00:00", "USERKNOWN",
              "N", "YN") + "\r\n";
  WriteFile(dir / "a.log", a);
  WriteFile(dir / "b.log", b);
  const std::vector<fs::path> files = {dir / "a.log", dir / "b.log"};
  const auto first = IngestFiles(files, ColumnLayout{});
  EXPECT_EQ(first.stats.lines, 42u);
  EXPECT_EQ(first.stats.parsed, 40u);
  EXPECT_EQ(first.stats.malformed, 1u);
  EXPECT_EQ(first.stats.bad_timestamp, 1u);
  EXPECT_EQ(first.stats.consistency_violations, 10u);
  EXPECT_EQ(first.store.total_record_count(), first.stats.parsed);
  EXPECT_EQ(first.store.user_count(), 4u);

  IngestOptions parallel;
  parallel.jobs = 4;
  EXPECT_EQ(IngestFiles(files, ColumnLayout{}, parallel).store, first.store);
  EXPECT_EQ(IngestFiles(files, ColumnLayout{}).store, first.store);
}

TEST(IngestFiles, StrictModeAndMissingFile) {
  const auto dir = TempDir("strict");
  WriteFile(dir / "bad.log", "junk\n" + Line("1", "a", "02/15/2014 10:00:00") + "\njunk\n");
  IngestOptions strict;
  strict.mode = ParseMode::kStrict;
  EXPECT_THROW(IngestFiles({dir / "bad.log"}, ColumnLayout{}, strict), DataQualityError);
  EXPECT_EQ(IngestFiles({dir / "bad.log"}, ColumnLayout{}).store.total_record_count(), 1u);
  // Exactly half malformed is tolerated.
  WriteFile(dir / "half.log", "junk\n" + Line("1", "a", "02/15/2014 10:00:00") + "\n");
  EXPECT_EQ(IngestFiles({dir / "half.log"}, ColumnLayout{}, strict).stats.parsed, 1u);
  EXPECT_THROW(IngestFiles({dir / "missing.log"}, ColumnLayout{}), IoError);
}

TEST(UserStoreFiles, SaveLoadRoundTrip) {
  const auto dir = TempDir("store");
  std::vector<LogRecord> records;
  for (int i = 0; i < 25; ++i) {
    char when[32];
    std::snprintf(when, sizeof when, "02/%02d/2014 %02d:00:00", 15 + i % 10, i % 24);
    records.push_back(ParseLogLine(
        Line(std::to_string(i), i % 2 ? "bob" : "al,ice", when, "USERKNOWN", "Y", "YY",
             "Mozilla/5.0 \"quoted\" Chrome/33.0"),
        ColumnLayout{}));
  }
  const auto store = GroupByUser(records);
  const auto manifest = SaveUserStore(store, ColumnLayout{}, dir / "out");
  ASSERT_EQ(manifest.size(), 2u);
  EXPECT_EQ(manifest[0].user_id, "al,ice");
  EXPECT_EQ(manifest[0].count, 13u);
  EXPECT_EQ(manifest[0].first_timestamp, "02/15/2014 00:00:00");
  EXPECT_EQ(LoadUserStore(dir / "out"), store);
  EXPECT_EQ(LoadUserStoreLayout(dir / "out"), ColumnLayout{});
  EXPECT_THROW(LoadUserStore(dir / "nowhere"), IoError);
}

}  // namespace
}  // namespace uba
