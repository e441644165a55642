#include "uba/forest.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>

#include "uba/parallel.h"
#include "uba/status.h"

namespace uba {
namespace {

constexpr std::uint64_t kExactHarmonicLimit = 1'000'000;
constexpr std::uint64_t kHarmonicTableSize = 1 << 16;
constexpr double kEulerGamma = 0.57721566490153286061;

const std::vector<double>& HarmonicTable() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kHarmonicTableSize + 1, 0.0);
    double h = 0.0;
    for (std::uint64_t i = 1; i <= kHarmonicTableSize; ++i) {
      h += 1.0 / static_cast<double>(i);
      t[i] = h;
    }
    return t;
  }();
  return table;
}

using PointRefs = std::vector<const FeatureVector*>;

class TreeBuilder {
 public:
  TreeBuilder(std::uint32_t height_limit, Rng& rng,
              const SplitObserver& observer)
      : height_limit_(height_limit), rng_(rng), observer_(observer) {}

  IsolationTree Build(PointRefs points) {
    tree_.nodes.clear();
    if (!points.empty()) dims_ = points.front()->size();
    Grow(std::span<const FeatureVector*>(points), 0);
    return std::move(tree_);
  }

 private:
  std::uint32_t Leaf(std::size_t size) {
    TreeNode leaf;
    leaf.size = static_cast<std::uint32_t>(size);
    tree_.nodes.push_back(leaf);
    return static_cast<std::uint32_t>(tree_.nodes.size() - 1);
  }

  std::uint32_t Grow(std::span<const FeatureVector*> points,
                     std::uint32_t depth) {
    if (points.size() <= 1 || depth >= height_limit_) {
      return Leaf(points.size());
    }

    // Ranges of the dimensions that admit a value strictly between min and
    // max.
    splittable_.clear();
    for (std::size_t d = 0; d < dims_; ++d) {
      double lo = (*points.front())[d];
      double hi = lo;
      for (const FeatureVector* p : points) {
        lo = std::min(lo, (*p)[d]);
        hi = std::max(hi, (*p)[d]);
      }
      if (std::nextafter(lo, hi) < hi) splittable_.push_back({d, lo, hi});
    }
    if (splittable_.empty()) return Leaf(points.size());

    const Range range = splittable_[rng_.UniformInt(splittable_.size())];
    const double split = DrawSplit(range.lo, range.hi);

    const std::size_t node_index = tree_.nodes.size();
    TreeNode node;
    node.dim = static_cast<std::int32_t>(range.dim);
    node.split = split;
    tree_.nodes.push_back(node);
    if (observer_) {
      observer_(node, std::span<const FeatureVector* const>(points.data(),
                                                            points.size()));
    }

    auto middle = std::partition(
        points.begin(), points.end(),
        [&](const FeatureVector* p) { return (*p)[range.dim] < split; });
    const auto left_count =
        static_cast<std::size_t>(std::distance(points.begin(), middle));

    const std::uint32_t left = Grow(points.first(left_count), depth + 1);
    const std::uint32_t right = Grow(points.subspan(left_count), depth + 1);
    tree_.nodes[node_index].left = left;
    tree_.nodes[node_index].right = right;
    return static_cast<std::uint32_t>(node_index);
  }

  // Uniform in (lo, hi); the caller guarantees such a value exists.
  double DrawSplit(double lo, double hi) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      const double split = std::lerp(lo, hi, rng_.UniformOpen());
      if (split > lo && split < hi) return split;
    }
    return std::nextafter(lo, hi);
  }

  struct Range {
    std::size_t dim;
    double lo;
    double hi;
  };

  std::uint32_t height_limit_;
  Rng& rng_;
  const SplitObserver& observer_;
  std::size_t dims_ = 0;
  std::vector<Range> splittable_;
  IsolationTree tree_;
};

void CheckUniformLength(std::span<const FeatureVector> data) {
  if (data.empty()) return;
  const std::size_t dims = data.front().size();
  for (const FeatureVector& v : data) {
    if (v.size() != dims) {
      throw InvalidInputError("feature vectors have mixed lengths (" +
                              std::to_string(dims) + " vs " +
                              std::to_string(v.size()) + ")");
    }
  }
}

void CheckFinite(std::span<const double> point) {
  for (double v : point) {
    if (!std::isfinite(v)) {
      throw InvalidInputError("feature vector holds a non-finite value");
    }
  }
}

}  // namespace

double HarmonicNumber(std::uint64_t k) {
  const auto& table = HarmonicTable();
  if (k <= kHarmonicTableSize) return table[k];
  if (k <= kExactHarmonicLimit) {
    double h = table[kHarmonicTableSize];
    for (std::uint64_t i = kHarmonicTableSize + 1; i <= k; ++i) {
      h += 1.0 / static_cast<double>(i);
    }
    return h;
  }
  const double x = static_cast<double>(k);
  return std::log(x) + kEulerGamma + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x);
}

double ExpectedPathLength(std::uint64_t size) {
  if (size <= 1) return 0.0;
  const double n = static_cast<double>(size);
  return 2.0 * HarmonicNumber(size - 1) - 2.0 * (n - 1.0) / n;
}

std::uint32_t DefaultHeightLimit(std::uint32_t sample_size) {
  if (sample_size <= 1) return 0;
  return static_cast<std::uint32_t>(std::bit_width(sample_size - 1));
}

IsolationTree BuildTree(std::span<const FeatureVector> sample,
                        std::uint32_t height_limit, Rng& rng,
                        const SplitObserver& observer) {
  CheckUniformLength(sample);
  PointRefs refs;
  refs.reserve(sample.size());
  for (const FeatureVector& v : sample) refs.push_back(&v);
  return TreeBuilder(height_limit, rng, observer).Build(std::move(refs));
}

double PathLength(const IsolationTree& tree, std::span<const double> point,
                  std::size_t dimensions) {
  if (point.size() != dimensions) {
    throw InvalidInputError("point has " + std::to_string(point.size()) +
                            " dimensions, expected " +
                            std::to_string(dimensions));
  }
  std::uint32_t index = 0;
  double edges = 0.0;
  while (!tree.nodes[index].is_leaf()) {
    const TreeNode& node = tree.nodes[index];
    index = point[static_cast<std::size_t>(node.dim)] < node.split ? node.left
                                                                   : node.right;
    edges += 1.0;
  }
  return edges + ExpectedPathLength(tree.nodes[index].size);
}

Forest::Forest(std::vector<IsolationTree> trees, std::size_t dimensions,
               std::uint32_t sample_size, std::uint32_t height_limit,
               std::uint64_t seed)
    : trees_(std::move(trees)),
      dimensions_(dimensions),
      sample_size_(sample_size),
      height_limit_(height_limit),
      seed_(seed) {}

double Forest::MeanPathLength(std::span<const double> point) const {
  if (trees_.empty()) throw InvalidInputError("forest has no trees");
  CheckFinite(point);
  double total = 0.0;
  for (const IsolationTree& tree : trees_) {
    total += PathLength(tree, point, dimensions_);
  }
  return total / static_cast<double>(trees_.size());
}

double Forest::Score(std::span<const double> point) const {
  return ScoreFromMeanPathLength(MeanPathLength(point), sample_size_);
}

double ScoreFromMeanPathLength(double mean_path_length,
                               std::uint32_t sample_size) {
  const double c = ExpectedPathLength(sample_size);
  if (c <= 0.0) throw InvalidInputError("sample size must be at least 2");
  return std::exp2(-mean_path_length / c);
}

Forest FitForest(std::span<const FeatureVector> data,
                 const ForestParams& params) {
  if (data.empty()) throw InvalidInputError("cannot fit a forest on no data");
  if (params.tree_count < 1) {
    throw InvalidInputError("tree_count must be at least 1");
  }
  if (params.sample_size < 2) {
    throw InvalidInputError("sample_size must be at least 2");
  }
  if (data.size() < 2) {
    throw InvalidInputError("need at least 2 data points to fit a forest");
  }
  CheckUniformLength(data);
  for (const FeatureVector& v : data) CheckFinite(v);

  const auto per_tree = static_cast<std::uint32_t>(
      std::min<std::size_t>(params.sample_size, data.size()));
  const std::uint32_t height_limit =
      params.height_limit.value_or(DefaultHeightLimit(per_tree));

  std::vector<IsolationTree> trees(params.tree_count);
  ParallelFor(params.tree_count, params.jobs, [&](std::size_t t) {
    Rng rng(DeriveSeed(params.seed, {t}));
    // Partial Fisher-Yates: the first `per_tree` slots hold the subsample.
    std::vector<std::uint32_t> order(data.size());
    std::iota(order.begin(), order.end(), 0u);
    for (std::uint32_t i = 0; i < per_tree; ++i) {
      const auto j = i + rng.UniformInt(order.size() - i);
      std::swap(order[i], order[j]);
    }
    PointRefs refs(per_tree);
    for (std::uint32_t i = 0; i < per_tree; ++i) refs[i] = &data[order[i]];
    static const SplitObserver kNoObserver;
    trees[t] = TreeBuilder(height_limit, rng, kNoObserver).Build(std::move(refs));
  });
  return Forest(std::move(trees), data.front().size(), per_tree, height_limit,
                params.seed);
}

}  // namespace uba
