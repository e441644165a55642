#include "uba/schema.h"

#include <set>
#include <string>
#include <utility>

#include "uba/status.h"

namespace uba {
namespace {

using nlohmann::json;

template <std::size_t N>
std::vector<std::string> Ordering(const std::array<std::string_view, N>& values) {
  return {values.begin(), values.end()};
}

DimensionSpec MatchRuleDimension() {
  return CategoricalDimension(std::string(kMatchRule),
                              Ordering(kMatchRuleValues));
}
DimensionSpec SignatureCheckDimension() {
  return CategoricalDimension(std::string(kSignatureCheck),
                              Ordering(kSignatureCheckValues));
}
DimensionSpec DeviceCheckDimension() {
  return CategoricalDimension(std::string(kDeviceCheck),
                              Ordering(kDeviceCheckValues));
}
DimensionSpec BrowserDimension() {
  return CategoricalDimension(std::string(kBrowser), Ordering(kBrowserValues));
}

const std::string& CategoricalField(std::string_view name,
                                    const LogRecord& record) {
  if (name == kMatchRule) return record.match_rule;
  if (name == kSignatureCheck) return record.signature_check;
  if (name == kDeviceCheck) return record.device_check;
  if (name == kBrowser) return record.browser;
  throw InvalidInputError("no log field for dimension " + std::string(name));
}

bool IsKnownDimension(std::string_view name) {
  return name == kMatchRule || name == kSignatureCheck ||
         name == kDeviceCheck || name == kBrowser || name == kDayOfWeek ||
         name == kHourOfDay;
}

}  // namespace

DimensionSpec ContinuousDimension(std::string name) {
  return DimensionSpec{std::move(name), DimensionKind::kContinuous, {}};
}

DimensionSpec CategoricalDimension(std::string name,
                                   std::vector<std::string> ordering) {
  if (ordering.empty()) {
    throw InvalidInputError("categorical dimension " + name +
                            " has an empty ordering");
  }
  std::set<std::string_view> seen;
  for (const std::string& v : ordering) {
    if (!seen.insert(v).second) {
      throw InvalidInputError("duplicate value '" + v + "' in ordering of " +
                              name);
    }
  }
  return DimensionSpec{std::move(name), DimensionKind::kCategorical,
                       std::move(ordering)};
}

FeatureSchema BuildSchema(int system_id) {
  FeatureSchema schema;
  schema.system_id = system_id;
  auto& dims = schema.dimensions;
  auto add_categorical = [&] {
    dims.push_back(MatchRuleDimension());
    dims.push_back(SignatureCheckDimension());
    dims.push_back(DeviceCheckDimension());
    dims.push_back(BrowserDimension());
  };
  auto add_time = [&] {
    dims.push_back(ContinuousDimension(std::string(kDayOfWeek)));
    dims.push_back(ContinuousDimension(std::string(kHourOfDay)));
  };
  switch (system_id) {
    case 1:
      dims.push_back(MatchRuleDimension());
      break;
    case 2:
      dims.push_back(SignatureCheckDimension());
      break;
    case 3:
      dims.push_back(DeviceCheckDimension());
      break;
    case 4:
      dims.push_back(BrowserDimension());
      break;
    case 5:
      add_time();
      break;
    case 6:
      add_categorical();
      break;
    case 7:
      add_categorical();
      add_time();
      break;
    default:
      throw InvalidInputError("system id must be in 1..7, got " +
                              std::to_string(system_id));
  }
  return schema;
}

double EncodeCategorical(const DimensionSpec& spec, std::string_view raw) {
  if (spec.kind != DimensionKind::kCategorical) {
    throw InvalidInputError("dimension " + spec.name + " is not categorical");
  }
  for (std::size_t i = 0; i < spec.ordering.size(); ++i) {
    if (spec.ordering[i] == raw) return static_cast<double>(i);
  }
  throw UnknownCategoryError(spec.name, std::string(raw));
}

const std::string& DecodeCategorical(const DimensionSpec& spec,
                                     std::size_t ordinal) {
  if (spec.kind != DimensionKind::kCategorical ||
      ordinal >= spec.ordering.size()) {
    throw InvalidInputError("ordinal " + std::to_string(ordinal) +
                            " not decodable for dimension " + spec.name);
  }
  return spec.ordering[ordinal];
}

FeatureVector ExtractFeatures(const FeatureSchema& schema,
                              const LogRecord& record) {
  FeatureVector out;
  out.reserve(schema.size());
  for (const DimensionSpec& dim : schema.dimensions) {
    if (dim.name == kDayOfWeek) {
      out.push_back(record.day_of_week);
    } else if (dim.name == kHourOfDay) {
      out.push_back(record.hour_of_day);
    } else {
      const std::string& raw = CategoricalField(dim.name, record);
      if (raw.empty()) throw MissingFieldError(dim.name);
      out.push_back(EncodeCategorical(dim, raw));
    }
  }
  return out;
}

json SchemaToJson(const FeatureSchema& schema) {
  json dims = json::array();
  for (const DimensionSpec& d : schema.dimensions) {
    json entry{{"name", d.name}};
    if (d.kind == DimensionKind::kCategorical) {
      entry["kind"] = "categorical";
      entry["ordering"] = d.ordering;
    } else {
      entry["kind"] = "continuous";
    }
    dims.push_back(std::move(entry));
  }
  return json{{"system_id", schema.system_id}, {"dimensions", std::move(dims)}};
}

FeatureSchema SchemaFromJson(const json& doc) {
  try {
    FeatureSchema schema;
    schema.system_id = doc.at("system_id").get<int>();
    std::set<std::string> names;
    for (const json& d : doc.at("dimensions")) {
      auto name = d.at("name").get<std::string>();
      if (!IsKnownDimension(name)) {
        throw FormatError("unknown dimension name " + name);
      }
      if (!names.insert(name).second) {
        throw FormatError("duplicate dimension name " + name);
      }
      const auto kind = d.at("kind").get<std::string>();
      if (kind == "categorical") {
        schema.dimensions.push_back(CategoricalDimension(
            std::move(name), d.at("ordering").get<std::vector<std::string>>()));
      } else if (kind == "continuous") {
        schema.dimensions.push_back(ContinuousDimension(std::move(name)));
      } else {
        throw FormatError("unknown dimension kind " + kind);
      }
    }
    return schema;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad schema document: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw FormatError(std::string("bad schema document: ") + e.what());
  }
}

}  // namespace uba
