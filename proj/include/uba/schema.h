#ifndef UBA_SCHEMA_H_
#define UBA_SCHEMA_H_

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uba/forest.h"
#include "uba/log_record.h"

namespace uba {

inline constexpr int kMinSystemId = 1;
inline constexpr int kMaxSystemId = 7;

// Dimension names. Each names the LogRecord field it is extracted from.
inline constexpr std::string_view kMatchRule = "MatchRule";
inline constexpr std::string_view kSignatureCheck = "SignatureCheck";
inline constexpr std::string_view kDeviceCheck = "DeviceCheck";
inline constexpr std::string_view kBrowser = "Browser";
inline constexpr std::string_view kDayOfWeek = "DayOfWeek";
inline constexpr std::string_view kHourOfDay = "HourOfDay";

// Authentication rules in their published listing order; ordinal = index.
inline constexpr std::array<std::string_view, 8> kMatchRuleValues = {
    "DEVICEIDCHECK",
    "DEVICEVELOCITY",
    "USER_DEVICE_ASSOCIATED_AND_DEVICE_MFP_MATCHED",
    "USER_DEVICE_ASSOCIATED_AND_DEVICE_MFP_NOT_MATCHED",
    "USER_DEVICE_NOT_ASSOCIATED_AND_DEVICE_MFP_MATCHED",
    "USER_DEVICE_NOT_ASSOCIATED_AND_DEVICE_MFP_NOT_MATCHED",
    "USERVELOCITY",
    "USERKNOWN",
};

inline constexpr std::array<std::string_view, 2> kSignatureCheckValues = {"N",
                                                                          "Y"};
inline constexpr std::array<std::string_view, 3> kDeviceCheckValues = {
    "NN", "YN", "YY"};

// The detected browsers, alphabetical.
inline constexpr std::array<std::string_view, 8> kBrowserValues = {
    "Android", "Chrome", "Firefox", "Internet Explorer",
    "Opera",   "PSP",    "Safari",  "SeaMonkey",
};

enum class DimensionKind { kContinuous, kCategorical };

struct DimensionSpec {
  std::string name;
  DimensionKind kind = DimensionKind::kContinuous;
  // Categorical only: raw value at index i encodes to ordinal i.
  std::vector<std::string> ordering;

  bool operator==(const DimensionSpec&) const = default;
};

DimensionSpec ContinuousDimension(std::string name);
// Throws InvalidInputError when `ordering` holds duplicates or is empty.
DimensionSpec CategoricalDimension(std::string name,
                                   std::vector<std::string> ordering);

struct FeatureSchema {
  int system_id = 0;
  std::vector<DimensionSpec> dimensions;

  std::size_t size() const { return dimensions.size(); }
  bool operator==(const FeatureSchema&) const = default;
};

// Systems 1-5 use one basic feature each (time contributes two dimensions);
// system 6 combines the four categorical features and system 7 adds time.
// Throws InvalidInputError for ids outside 1..7.
FeatureSchema BuildSchema(int system_id);

// Ordinal of `raw` as a real. Throws UnknownCategoryError when absent and
// InvalidInputError for a continuous spec.
double EncodeCategorical(const DimensionSpec& spec, std::string_view raw);

// Inverse of EncodeCategorical. Throws InvalidInputError when out of range.
const std::string& DecodeCategorical(const DimensionSpec& spec,
                                     std::size_t ordinal);

// One value per dimension. Throws MissingFieldError for an empty referenced
// field and UnknownCategoryError for values outside an ordering.
FeatureVector ExtractFeatures(const FeatureSchema& schema,
                              const LogRecord& record);

// {system_id, dimensions: [{name, kind, ordering?}]}
nlohmann::json SchemaToJson(const FeatureSchema& schema);
// Throws FormatError on malformed documents or unknown dimension names.
FeatureSchema SchemaFromJson(const nlohmann::json& doc);

}  // namespace uba

#endif  // UBA_SCHEMA_H_
