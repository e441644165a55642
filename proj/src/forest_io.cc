#include "uba/forest_io.h"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uba/status.h"

namespace uba {
namespace {

using nlohmann::json;

json NodeToJson(const IsolationTree& tree, std::uint32_t index) {
  const TreeNode& node = tree.nodes[index];
  if (node.is_leaf()) return json{{"leaf_size", node.size}};
  return json{{"dim", node.dim},
              {"split", node.split},
              {"left", NodeToJson(tree, node.left)},
              {"right", NodeToJson(tree, node.right)}};
}

std::uint32_t NodeFromJson(const json& doc, std::size_t dimensions,
                           IsolationTree& tree) {
  if (!doc.is_object()) throw FormatError("tree node is not an object");
  const auto index = static_cast<std::uint32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (doc.contains("leaf_size")) {
    tree.nodes[index].size = doc.at("leaf_size").get<std::uint32_t>();
    return index;
  }
  const auto dim = doc.at("dim").get<std::int32_t>();
  if (dim < 0 || static_cast<std::size_t>(dim) >= dimensions) {
    throw FormatError("tree node dimension " + std::to_string(dim) +
                      " out of range");
  }
  tree.nodes[index].dim = dim;
  tree.nodes[index].split = doc.at("split").get<double>();
  const std::uint32_t left = NodeFromJson(doc.at("left"), dimensions, tree);
  const std::uint32_t right = NodeFromJson(doc.at("right"), dimensions, tree);
  tree.nodes[index].left = left;
  tree.nodes[index].right = right;
  return index;
}

}  // namespace

json TreeToJson(const IsolationTree& tree) {
  if (tree.nodes.empty()) return json{{"leaf_size", 0}};
  return NodeToJson(tree, 0);
}

IsolationTree TreeFromJson(const json& doc, std::size_t dimensions) {
  IsolationTree tree;
  try {
    NodeFromJson(doc, dimensions, tree);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad tree node: ") + e.what());
  }
  return tree;
}

json ForestToJson(const Forest& forest) {
  json trees = json::array();
  for (const IsolationTree& tree : forest.trees()) {
    trees.push_back(TreeToJson(tree));
  }
  return json{{"format_version", kForestFormatVersion},
              {"sample_size", forest.sample_size()},
              {"tree_count", forest.tree_count()},
              {"height_limit", forest.height_limit()},
              {"seed", forest.seed()},
              {"dimensions", forest.dimensions()},
              {"trees", std::move(trees)}};
}

Forest ForestFromJson(const json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kForestFormatVersion) {
      throw FormatError("unsupported forest format_version " +
                        std::to_string(version));
    }
    const auto dimensions = doc.at("dimensions").get<std::size_t>();
    const auto tree_count = doc.at("tree_count").get<std::size_t>();
    const json& tree_docs = doc.at("trees");
    if (!tree_docs.is_array() || tree_docs.size() != tree_count) {
      throw FormatError("tree_count does not match the trees array");
    }
    std::vector<IsolationTree> trees;
    trees.reserve(tree_count);
    for (const json& t : tree_docs) trees.push_back(TreeFromJson(t, dimensions));
    return Forest(std::move(trees), dimensions,
                  doc.at("sample_size").get<std::uint32_t>(),
                  doc.at("height_limit").get<std::uint32_t>(),
                  doc.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad forest document: ") + e.what());
  }
}

}  // namespace uba
