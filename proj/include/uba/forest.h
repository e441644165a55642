#ifndef UBA_FOREST_H_
#define UBA_FOREST_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "uba/random.h"

namespace uba {

// One encoded data point. Every value is finite and the length equals the
// dimension count of the schema that produced it.
using FeatureVector = std::vector<double>;

// Expected path length of an unsuccessful search in a binary search tree built
// on `size` points: 2 H(size-1) - 2 (size-1) / size, and 0 for size <= 1.
// H is the harmonic number computed by exact summation up to 10^6 terms.
double ExpectedPathLength(std::uint64_t size);

// Harmonic number H(k) = sum_{i=1..k} 1/i (exact summation up to 10^6).
double HarmonicNumber(std::uint64_t k);

// Flat isolation tree. Node 0 is the root. Internal nodes route a point to
// `left` when point[dim] < split and to `right` otherwise.
struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t dim = kLeaf;
  double split = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  // Number of construction points that terminated here (leaves only).
  std::uint32_t size = 0;

  bool is_leaf() const { return dim == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

struct IsolationTree {
  std::vector<TreeNode> nodes;

  const TreeNode& root() const { return nodes.front(); }
  bool operator==(const IsolationTree&) const = default;
};

// Observer invoked for every internal node during construction with the
// node's sample; lets tests check split validity without exposing internals.
using SplitObserver =
    std::function<void(const TreeNode& node,
                       std::span<const FeatureVector* const> sample)>;

// Builds one tree on `sample`. Each node picks a dimension uniformly among
// those where the node sample has min < max, then a split uniformly in the
// open interval (min, max). Leaves are emitted for samples of size <= 1, at
// depth == height_limit, or when no dimension can be split.
// Throws InvalidInputError on mixed vector lengths.
IsolationTree BuildTree(std::span<const FeatureVector> sample,
                        std::uint32_t height_limit, Rng& rng,
                        const SplitObserver& observer = {});

// Edges traversed from the root to the terminating leaf plus
// ExpectedPathLength(leaf.size). Throws InvalidInputError when the point's
// length differs from `dimensions`.
double PathLength(const IsolationTree& tree, std::span<const double> point,
                  std::size_t dimensions);

struct ForestParams {
  std::uint32_t tree_count = 100;
  std::uint32_t sample_size = 256;
  std::uint64_t seed = 0;
  // Defaults to ceil(log2(per-tree sample size)).
  std::optional<std::uint32_t> height_limit;
  // Worker threads for tree construction; 0 = hardware concurrency.
  std::size_t jobs = 1;
};

// Immutable fitted ensemble. Safe for concurrent scoring.
class Forest {
 public:
  Forest() = default;
  Forest(std::vector<IsolationTree> trees, std::size_t dimensions,
         std::uint32_t sample_size, std::uint32_t height_limit,
         std::uint64_t seed);

  const std::vector<IsolationTree>& trees() const { return trees_; }
  std::size_t tree_count() const { return trees_.size(); }
  std::size_t dimensions() const { return dimensions_; }
  // Per-tree subsample size actually used; normalizes the score.
  std::uint32_t sample_size() const { return sample_size_; }
  std::uint32_t height_limit() const { return height_limit_; }
  std::uint64_t seed() const { return seed_; }

  // Mean PathLength over all trees.
  double MeanPathLength(std::span<const double> point) const;

  // 2^(-E[h(point)] / c(sample_size)), in [0, 1].
  double Score(std::span<const double> point) const;

  bool operator==(const Forest&) const = default;

 private:
  std::vector<IsolationTree> trees_;
  std::size_t dimensions_ = 0;
  std::uint32_t sample_size_ = 0;
  std::uint32_t height_limit_ = 0;
  std::uint64_t seed_ = 0;
};

// ceil(log2(sample_size)).
std::uint32_t DefaultHeightLimit(std::uint32_t sample_size);

// Fits `params.tree_count` trees, each on min(sample_size, data.size()) points
// drawn uniformly without replacement. Tree i draws from the stream
// DeriveSeed(seed, {i}), so the result does not depend on `jobs`.
// Throws InvalidInputError on empty data, tree_count < 1, sample_size < 2,
// fewer than two data points, or mixed vector lengths.
Forest FitForest(std::span<const FeatureVector> data,
                 const ForestParams& params);

// Score for a given mean path length and per-tree sample size.
double ScoreFromMeanPathLength(double mean_path_length,
                               std::uint32_t sample_size);

}  // namespace uba

#endif  // UBA_FOREST_H_
