#ifndef UBA_FOREST_IO_H_
#define UBA_FOREST_IO_H_

#include <string>

#include "json.hpp"
#include "uba/forest.h"

namespace uba {

inline constexpr int kForestFormatVersion = 1;

// Versioned document:
//   {format_version, sample_size, tree_count, height_limit, seed, dimensions,
//    trees: [ {dim, split, left, right} | {leaf_size} ]}
// Splits are written with shortest round-trip decimal precision, so
// ForestFromJson(ForestToJson(f)) == f exactly.
nlohmann::json ForestToJson(const Forest& forest);
nlohmann::json TreeToJson(const IsolationTree& tree);

// Throws FormatError on a malformed or unsupported document.
Forest ForestFromJson(const nlohmann::json& doc);
IsolationTree TreeFromJson(const nlohmann::json& doc, std::size_t dimensions);

}  // namespace uba

#endif  // UBA_FOREST_IO_H_
