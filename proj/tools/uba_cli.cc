// uba: batch front end for ingest, train, score, evaluate and synth.
//
// Exit codes: 0 success, 2 usage/config/IO error, 3 data-quality failure,
// 4 internal error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uba/csv.h"
#include "uba/eval.h"
#include "uba/ingest.h"
#include "uba/model.h"
#include "uba/parallel.h"
#include "uba/random.h"
#include "uba/schema.h"
#include "uba/status.h"
#include "uba/synth.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDataQuality = 3;
constexpr int kExitInternal = 4;

// Raised for bad flag values that CLI11 cannot check by itself.
struct UsageError : uba::Error {
  using uba::Error::Error;
};

struct Band {
  std::size_t lo = 501;
  std::size_t hi = 600;
};

Band ParseBand(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--band must be lo:hi");
  try {
    std::size_t used = 0;
    Band b;
    b.lo = std::stoull(text.substr(0, colon), &used);
    if (used != colon) throw UsageError("--band must be lo:hi");
    const std::string hi = text.substr(colon + 1);
    b.hi = std::stoull(hi, &used);
    if (used != hi.size()) throw UsageError("--band must be lo:hi");
    if (b.lo > b.hi) throw UsageError("--band: lo > hi");
    return b;
  } catch (const std::logic_error&) {
    throw UsageError("--band must be lo:hi with non-negative integers");
  }
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw uba::IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw uba::IoError("write failed: " + path.string());
}

void PrepareOutputDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw uba::IoError("cannot create output directory " + dir.string());
}

void WriteEffectiveConfig(const fs::path& dir, const json& config) {
  WriteText(dir / "effective_config.json", config.dump(2) + "\n");
}

// Inputs: files as given; a directory contributes its *.log files (sorted).
std::vector<fs::path> ExpandInputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".log")
          found.push_back(e.path());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw uba::IoError("no .log files in " + p.string());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw uba::IoError("input not found: " + p.string());
    }
  }
  return files;
}

// --layout wins; otherwise a layout.json next to the first input; otherwise
// the default 42-column layout.
uba::ColumnLayout ResolveLayout(const std::string& layout_flag,
                                const std::vector<std::string>& inputs) {
  if (!layout_flag.empty()) return uba::LoadLayout(layout_flag);
  if (!inputs.empty()) {
    fs::path p(inputs.front());
    fs::path dir = fs::is_directory(p) ? p : p.parent_path();
    if (dir.empty()) dir = ".";
    if (fs::is_regular_file(dir / "layout.json"))
      return uba::LoadLayout(dir / "layout.json");
  }
  return uba::ColumnLayout{};
}

uba::ParseMode ParseModeFlag(const std::string& mode) {
  if (mode == "lenient") return uba::ParseMode::kLenient;
  if (mode == "strict") return uba::ParseMode::kStrict;
  throw UsageError("--mode must be lenient or strict");
}

void CheckSystemId(int id) {
  if (id < uba::kMinSystemId || id > uba::kMaxSystemId)
    throw UsageError("--system must be in 1..7, got " + std::to_string(id));
}

// Shared flag values; unused fields are ignored by each subcommand.
struct Flags {
  std::vector<std::string> inputs;
  std::string output;
  std::string models;
  std::string layout;
  std::vector<int> systems;
  std::uint32_t trees = 100;
  std::uint32_t sample_size = 256;
  std::uint64_t seed = 0;
  double threshold = uba::kDefaultThreshold;
  std::size_t runs = 10;
  std::string band;
  std::string mode = "lenient";
  std::size_t jobs = 1;
  bool verdicts = false;
  std::optional<std::size_t> users;
  std::string separability;
  std::optional<std::size_t> files;
};

// ---- ingest ----------------------------------------------------------------

int CmdIngest(const Flags& f) {
  const auto files = ExpandInputs(f.inputs);
  const auto layout = ResolveLayout(f.layout, f.inputs);
  uba::IngestOptions opts;
  opts.mode = ParseModeFlag(f.mode);
  opts.jobs = f.jobs;
  PrepareOutputDir(f.output);

  json config = {{"subcommand", "ingest"},
                 {"mode", f.mode},
                 {"jobs", f.jobs},
                 {"layout", uba::LayoutToJson(layout)}};
  json input_list = json::array();
  for (const auto& p : files) input_list.push_back(p.string());
  config["input"] = input_list;
  WriteEffectiveConfig(f.output, config);

  auto result = uba::IngestFiles(files, layout, opts);
  const auto manifest = uba::SaveUserStore(result.store, layout, f.output);
  const auto& s = result.stats;
  std::cout << "users: " << result.store.user_count() << "\n"
            << "records: " << result.store.total_record_count() << "\n"
            << "lines: " << s.lines << "\n"
            << "skipped: " << s.skipped() << " (malformed " << s.malformed
            << ", bad timestamp " << s.bad_timestamp << ")\n"
            << "consistency_violations: " << s.consistency_violations << "\n";
  for (const auto& issue : s.issues)
    std::cerr << issue.source << ":" << issue.line << ": " << issue.message
              << "\n";
  (void)manifest;
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

std::string ModelDirName(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "m%06zu", index);
  return buf;
}

struct TrainOutcome {
  std::string status;
  std::string dir;
  std::size_t records = 0;
  std::size_t skipped_records = 0;
  std::string hash;
  std::string reason;
};

int CmdTrain(const Flags& f) {
  if (f.systems.size() != 1) throw UsageError("train takes exactly one --system");
  CheckSystemId(f.systems.front());
  if (f.inputs.size() != 1) throw UsageError("train takes one --input store");
  const auto store = uba::LoadUserStore(f.inputs.front());
  const auto schema = uba::BuildSchema(f.systems.front());

  std::vector<std::string> users;
  if (f.band.empty()) {
    for (const auto& [id, recs] : store.users()) users.push_back(id);
  } else {
    const Band b = ParseBand(f.band);
    users = uba::SelectUsersByFrequency(store, b.lo, b.hi);
  }

  PrepareOutputDir(f.output);
  json config = {{"subcommand", "train"},
                 {"input", f.inputs.front()},
                 {"system", f.systems.front()},
                 {"trees", f.trees},
                 {"sample_size", f.sample_size},
                 {"seed", f.seed},
                 {"threshold", f.threshold},
                 {"band", f.band.empty() ? json(nullptr) : json(f.band)},
                 {"jobs", f.jobs}};
  WriteEffectiveConfig(f.output, config);

  std::vector<TrainOutcome> outcomes(users.size());
  uba::ParallelFor(users.size(), f.jobs, [&](std::size_t i) {
    const std::string& user = users[i];
    TrainOutcome& out = outcomes[i];
    uba::TrainParams params;
    params.tree_count = f.trees;
    params.sample_size = f.sample_size;
    params.seed = uba::DeriveSeed(f.seed, {Fnv1a(user)});
    try {
      const auto model = uba::TrainUserModel(user, store.records(user), schema,
                                             params, f.threshold);
      out.dir = ModelDirName(i);
      out.hash = uba::SaveModelBundle(model, fs::path(f.output) / out.dir);
      out.status = "trained";
      out.records = model.training_record_count;
      out.skipped_records = model.training_skipped;
    } catch (const uba::InsufficientDataError& e) {
      out.status = "skipped";
      out.records = store.records(user).size();
      out.reason = e.what();
    }
  });

  std::ostringstream summary;
  summary << "user_id,status,dir,records,skipped_records,content_hash,reason\n";
  std::size_t trained = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& o = outcomes[i];
    std::vector<std::string> row = {users[i],
                                    o.status,
                                    o.dir,
                                    std::to_string(o.records),
                                    std::to_string(o.skipped_records),
                                    o.hash,
                                    o.reason};
    summary << uba::JoinCsvLine(row) << "\n";
    if (o.status == "trained") ++trained;
    else std::cout << "skipped " << users[i] << ": " << o.reason << "\n";
  }
  WriteText(fs::path(f.output) / "summary.csv", summary.str());
  std::cout << "trained: " << trained << "\n"
            << "skipped: " << users.size() - trained << "\n";
  return kExitOk;
}

// ---- score -----------------------------------------------------------------

// user_id -> bundle directory, from a train summary.
std::map<std::string, fs::path> ReadModelIndex(const fs::path& models) {
  std::ifstream in(models / "summary.csv");
  if (!in) throw uba::IoError("cannot read " + (models / "summary.csv").string());
  std::map<std::string, fs::path> index;
  std::string line;
  std::getline(in, line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto fields = uba::SplitCsvLine(line);
    if (fields.size() != 7)
      throw uba::FormatError("summary.csv line " + std::to_string(n) +
                             ": expected 7 fields");
    if (fields[1] == "trained") index[fields[0]] = models / fields[2];
  }
  return index;
}

int CmdScore(const Flags& f) {
  if (f.models.empty()) throw UsageError("score needs --models");
  const auto index = ReadModelIndex(f.models);
  const auto files = ExpandInputs(f.inputs);
  const auto layout = ResolveLayout(f.layout, f.inputs);
  PrepareOutputDir(f.output);

  json config = {{"subcommand", "score"},
                 {"models", f.models},
                 {"layout", uba::LayoutToJson(layout)}};
  json input_list = json::array();
  for (const auto& p : files) input_list.push_back(p.string());
  config["input"] = input_list;
  WriteEffectiveConfig(f.output, config);

  std::map<std::string, uba::UserModel> loaded;
  std::ostringstream out;
  out << "user,record_ref,score,label,error\n";
  std::size_t scored = 0, errors = 0;
  auto error_row = [&](const std::string& user, const std::string& ref,
                       const std::string& reason) {
    std::vector<std::string> row = {user, ref, "", "", reason};
    out << uba::JoinCsvLine(row) << "\n";
    ++errors;
  };
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw uba::IoError("cannot read " + file.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      uba::LogRecord rec;
      try {
        rec = uba::ParseLogLine(line, layout, line_no, file.filename().string());
      } catch (const uba::ParseError& e) {
        error_row("", file.filename().string() + ":" + std::to_string(line_no),
                  e.what());
        continue;
      }
      auto it = index.find(rec.user_id);
      if (it == index.end()) {
        error_row(rec.user_id, rec.record_ref, "no model for user");
        continue;
      }
      auto model_it = loaded.find(rec.user_id);
      if (model_it == loaded.end())
        model_it =
            loaded.emplace(rec.user_id, uba::LoadModelBundle(it->second)).first;
      try {
        const auto v = uba::Classify(model_it->second, rec);
        char score[32];
        std::snprintf(score, sizeof score, "%.6f", v.score);
        std::vector<std::string> row = {rec.user_id, rec.record_ref, score,
                                        std::string(uba::LabelName(v.label)),
                                        ""};
        out << uba::JoinCsvLine(row) << "\n";
        ++scored;
      } catch (const uba::MissingFieldError& e) {
        error_row(rec.user_id, rec.record_ref, e.what());
      } catch (const uba::UnknownCategoryError& e) {
        error_row(rec.user_id, rec.record_ref, e.what());
      }
    }
  }
  WriteText(fs::path(f.output) / "verdicts.csv", out.str());
  std::cout << "scored: " << scored << "\nerrors: " << errors << "\n";
  return kExitOk;
}

// ---- evaluate --------------------------------------------------------------

int CmdEvaluate(const Flags& f) {
  if (f.inputs.size() != 1) throw UsageError("evaluate takes one --input store");
  uba::ExperimentConfig cfg;
  if (!f.systems.empty()) cfg.system_ids = f.systems;
  for (int id : cfg.system_ids) CheckSystemId(id);
  cfg.runs = f.runs;
  cfg.threshold = f.threshold;
  cfg.tree_count = f.trees;
  cfg.sample_size = f.sample_size;
  cfg.master_seed = f.seed;
  if (!f.band.empty()) {
    const Band b = ParseBand(f.band);
    cfg.band_lo = b.lo;
    cfg.band_hi = b.hi;
  }
  cfg.jobs = f.jobs;
  cfg.keep_verdicts = f.verdicts;
  try {
    cfg.Validate();
  } catch (const uba::InvalidInputError& e) {
    throw UsageError(e.what());
  }

  const auto store = uba::LoadUserStore(f.inputs.front());
  PrepareOutputDir(f.output);
  json config = {{"subcommand", "evaluate"},
                 {"input", f.inputs.front()},
                 {"systems", cfg.system_ids},
                 {"runs", cfg.runs},
                 {"test_self", cfg.test_self},
                 {"test_other", cfg.test_other},
                 {"threshold", cfg.threshold},
                 {"trees", cfg.tree_count},
                 {"sample_size", cfg.sample_size},
                 {"seed", cfg.master_seed},
                 {"band", std::to_string(cfg.band_lo) + ":" +
                              std::to_string(cfg.band_hi)},
                 {"jobs", cfg.jobs},
                 {"verdicts", cfg.keep_verdicts}};
  WriteEffectiveConfig(f.output, config);

  const auto report = uba::RunExperiment(store, cfg);
  const fs::path out(f.output);
  const std::string table = uba::FormatReportTable(report);
  WriteText(out / "report.txt", table);
  WriteText(out / "report.csv", uba::ReportToCsv(report));
  // Histogram pools every (user, run) trial; with --runs 1 it is the
  // single-run distribution.
  for (const auto& sys : report.systems) {
    std::vector<std::uint64_t> counts;
    for (const auto& run : sys.own_anomalies_by_run)
      counts.insert(counts.end(), run.begin(), run.end());
    WriteText(out / ("histogram_system" + std::to_string(sys.system_id) + ".csv"),
              uba::HistogramToCsv(uba::AnomalousCountHistogram(counts)));
  }
  if (cfg.keep_verdicts) WriteText(out / "verdicts.csv", uba::VerdictsToCsv(report));
  std::cout << table;
  if (!report.skips.empty())
    std::cout << "skipped trials: " << report.skips.size() << "\n";
  return kExitOk;
}

// ---- synth -----------------------------------------------------------------

int CmdSynth(const Flags& f, bool seed_given) {
  uba::CorpusSpec spec;
  if (f.inputs.size() > 1) throw UsageError("synth takes at most one --input spec");
  if (!f.inputs.empty()) spec = uba::LoadCorpusSpec(f.inputs.front());
  if (seed_given) spec.seed = f.seed;
  if (f.users) spec.user_count = *f.users;
  if (f.files) spec.files = *f.files;
  if (f.separability == "low") spec.separability = uba::Separability::kLow;
  else if (f.separability == "high") spec.separability = uba::Separability::kHigh;
  else if (!f.separability.empty())
    throw UsageError("--separability must be low or high");
  try {
    spec.Validate();
  } catch (const uba::InvalidInputError& e) {
    throw UsageError(e.what());
  }
  PrepareOutputDir(f.output);
  json config = uba::CorpusSpecToJson(spec);
  config["subcommand"] = "synth";
  WriteEffectiveConfig(f.output, config);
  const auto manifest = uba::GenerateCorpus(spec, f.output);
  std::cout << "users: " << manifest.users << "\n"
            << "records: " << manifest.total_records << "\n"
            << "files: " << manifest.files.size() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-user anomalous behaviour detection over access logs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file (flags > env > config)");
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--output", f.output, "Output directory")
        ->required()
        ->envname("UBA_OUTPUT");
    sub->add_option("--jobs", f.jobs, "Worker threads (0 = all cores)")
        ->envname("UBA_JOBS");
  };
  auto add_forest = [&](CLI::App* sub) {
    sub->add_option("--trees", f.trees, "Trees per forest")
        ->check(CLI::PositiveNumber)
        ->envname("UBA_TREES");
    sub->add_option("--sample-size", f.sample_size, "Per-tree subsample size")
        ->check(CLI::Range(2u, 1u << 30))
        ->envname("UBA_SAMPLE_SIZE");
    sub->add_option("--seed", f.seed, "Master seed")->envname("UBA_SEED");
    sub->add_option("--threshold", f.threshold, "Anomaly threshold in (0,1)")
        ->check(CLI::Range(0.0, 1.0))
        ->envname("UBA_THRESHOLD");
  };

  auto* ingest = app.add_subcommand("ingest", "Raw logs -> user store");
  ingest->add_option("--input", f.inputs, "Log files or directories")
      ->required()
      ->envname("UBA_INPUT");
  ingest->add_option("--layout", f.layout, "Column layout JSON");
  ingest->add_option("--mode", f.mode, "lenient|strict")
      ->check(CLI::IsMember({"lenient", "strict"}))
      ->envname("UBA_MODE");
  add_common(ingest);

  auto* train = app.add_subcommand("train", "User store -> model bundles");
  train->add_option("--input", f.inputs, "User store directory")
      ->required()
      ->envname("UBA_INPUT");
  train->add_option("--system", f.systems, "Feature system id (1-7)")
      ->required()
      ->envname("UBA_SYSTEM");
  train->add_option("--band", f.band, "Only users with lo..hi records (lo:hi)")
      ->envname("UBA_BAND");
  add_forest(train);
  add_common(train);

  auto* score = app.add_subcommand("score", "Models + records -> verdict CSV");
  score->add_option("--input", f.inputs, "Log files or directories")
      ->required()
      ->envname("UBA_INPUT");
  score->add_option("--models", f.models, "Directory written by train")
      ->required()
      ->envname("UBA_MODELS");
  score->add_option("--layout", f.layout, "Column layout JSON");
  add_common(score);

  auto* evaluate = app.add_subcommand("evaluate", "User store -> report files");
  evaluate->add_option("--input", f.inputs, "User store directory")
      ->required()
      ->envname("UBA_INPUT");
  evaluate->add_option("--system", f.systems, "Feature system ids (default 1-7)")
      ->delimiter(',')
      ->envname("UBA_SYSTEM");
  evaluate->add_option("--runs", f.runs, "Random runs")
      ->check(CLI::PositiveNumber)
      ->envname("UBA_RUNS");
  evaluate->add_option("--band", f.band, "Record-count band lo:hi")
      ->envname("UBA_BAND");
  evaluate->add_flag("--verdicts", f.verdicts, "Also write verdicts.csv");
  add_forest(evaluate);
  add_common(evaluate);

  auto* synth = app.add_subcommand("synth", "Corpus spec -> synthetic logs");
  synth->add_option("--input", f.inputs, "Corpus spec JSON (optional)")
      ->envname("UBA_INPUT");
  auto* seed_opt =
      synth->add_option("--seed", f.seed, "Corpus seed")->envname("UBA_SEED");
  synth->add_option("--users", f.users, "Override user count");
  synth->add_option("--files", f.files, "Override shard count");
  synth->add_option("--separability", f.separability, "low|high")
      ->check(CLI::IsMember({"low", "high"}));
  add_common(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == ingest) return CmdIngest(f);
    if (active == train) return CmdTrain(f);
    if (active == score) return CmdScore(f);
    if (active == evaluate) return CmdEvaluate(f);
    return CmdSynth(f, seed_opt->count() > 0 || !seed_opt->empty());
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const uba::DataQualityError& e) {
    std::cerr << "data quality failure: " << e.what() << "\n";
    return kExitDataQuality;
  } catch (const uba::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const uba::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const uba::InvalidInputError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const uba::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
