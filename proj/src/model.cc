#include "uba/model.h"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "uba/forest_io.h"
#include "uba/status.h"

namespace uba {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failure on " + path.string());
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ParseJson(const std::string& text, const fs::path& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view LabelName(Label label) {
  return label == Label::kAnomalous ? "anomalous" : "normal";
}

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

UserModel TrainUserModel(const std::string& user_id,
                         std::span<const LogRecord> training,
                         const FeatureSchema& schema, const TrainParams& params,
                         double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidInputError("threshold must lie in (0, 1)");
  }
  std::vector<FeatureVector> vectors;
  vectors.reserve(training.size());
  std::size_t skipped = 0;
  for (const LogRecord& record : training) {
    try {
      vectors.push_back(ExtractFeatures(schema, record));
    } catch (const MissingFieldError&) {
      ++skipped;
    } catch (const UnknownCategoryError&) {
      ++skipped;
    }
  }
  if (vectors.size() < 2) {
    throw InsufficientDataError("user " + user_id + " has " +
                                std::to_string(vectors.size()) +
                                " usable training records, need at least 2");
  }
  ForestParams forest_params;
  forest_params.tree_count = params.tree_count;
  forest_params.sample_size = params.sample_size;
  forest_params.seed = params.seed;
  forest_params.jobs = params.jobs;

  UserModel model;
  model.user_id = user_id;
  model.schema = schema;
  model.forest = FitForest(vectors, forest_params);
  model.threshold = threshold;
  model.params = params;
  model.training_record_count = vectors.size();
  model.training_skipped = skipped;
  return model;
}

Verdict Classify(const UserModel& model, const LogRecord& record) {
  const FeatureVector x = ExtractFeatures(model.schema, record);
  return MakeVerdict(model.forest.Score(x), model.threshold);
}

std::string SaveModelBundle(const UserModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());

  const std::string model_doc = ForestToJson(model.forest).dump();
  const std::string schema_doc = SchemaToJson(model.schema).dump(2);
  const std::string hash = Sha256Hex(model_doc + schema_doc);
  const json meta{
      {"user_id", model.user_id},
      {"params",
       {{"tree_count", model.params.tree_count},
        {"sample_size", model.params.sample_size},
        {"seed", model.params.seed}}},
      {"threshold", model.threshold},
      {"training_record_count", model.training_record_count},
      {"training_skipped", model.training_skipped},
      {"content_hash", hash},
  };
  WriteFile(dir / "model.json", model_doc);
  WriteFile(dir / "schema.json", schema_doc + "\n");
  WriteFile(dir / "meta.json", meta.dump(2) + "\n");
  return hash;
}

UserModel LoadModelBundle(const fs::path& dir) {
  const std::string model_doc = ReadFile(dir / "model.json");
  std::string schema_doc = ReadFile(dir / "schema.json");
  const json meta = ParseJson(ReadFile(dir / "meta.json"), dir / "meta.json");
  if (!schema_doc.empty() && schema_doc.back() == '\n') schema_doc.pop_back();

  try {
    if (Sha256Hex(model_doc + schema_doc) !=
        meta.at("content_hash").get<std::string>()) {
      throw FormatError("content hash mismatch in " + dir.string());
    }
    UserModel model;
    model.forest = ForestFromJson(ParseJson(model_doc, dir / "model.json"));
    model.schema = SchemaFromJson(ParseJson(schema_doc, dir / "schema.json"));
    if (model.forest.dimensions() != model.schema.size()) {
      throw FormatError("forest and schema dimensionality differ in " +
                        dir.string());
    }
    model.user_id = meta.at("user_id").get<std::string>();
    model.threshold = meta.at("threshold").get<double>();
    const json& p = meta.at("params");
    model.params.tree_count = p.at("tree_count").get<std::uint32_t>();
    model.params.sample_size = p.at("sample_size").get<std::uint32_t>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.training_record_count =
        meta.at("training_record_count").get<std::size_t>();
    model.training_skipped = meta.value("training_skipped", std::size_t{0});
    return model;
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/meta.json: " + e.what());
  }
}

}  // namespace uba
