#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cofa/datamodel.hpp"
#include "cofa/random.hpp"

namespace cofa {

/// Stopping rules mirror rpart's defaults.
struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t min_split = 20;
  std::size_t min_bucket = 7;
  std::size_t max_depth = 30;
  /// A split is kept only if it removes at least this fraction of the root's
  /// total Gini impurity.
  double complexity = 0.01;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ForestParams&) const = default;
};

nlohmann::json forest_params_to_json(const ForestParams& p);
/// Missing keys keep their defaults.
ForestParams forest_params_from_json(const nlohmann::json& doc, ForestParams base = {});

enum class SplitKind { numeric_threshold, level_set };

struct SplitRule {
  std::size_t feature = 0;  // column index in the training dataset
  SplitKind kind = SplitKind::numeric_threshold;
  double threshold = 0.0;                  // numeric: value < threshold goes left
  std::vector<std::uint32_t> left_levels;  // level-set: sorted codes sent left

  bool sends_level_left(std::uint32_t code) const;
  bool operator==(const SplitRule&) const = default;
};

struct SplitCandidate {
  SplitRule rule;
  /// Parent Gini minus the size-weighted Gini of the two children.
  double improvement = 0.0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
};

struct TreeNode {
  std::size_t id = 0;
  std::optional<SplitRule> split;
  std::optional<std::pair<std::size_t, std::size_t>> children;
  double leaf_prediction = 0.0;  // positive fraction at the node
  std::size_t n_node = 0;
  std::size_t n_positive = 0;
  std::size_t depth = 0;
  /// Cluster-target levels among the rows at this node, sorted.
  std::vector<std::uint32_t> levels_present;

  bool is_leaf() const noexcept { return !children.has_value(); }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::size_t root = 0;

  bool is_trivial() const noexcept { return nodes.size() <= 1; }
  std::size_t n_leaves() const;
  bool operator==(const Tree&) const = default;
};

struct Forest {
  std::vector<Tree> trees;
  ForestParams params;
  std::size_t trivial_root_count = 0;
  /// Training schema and level dictionaries, indexed like the training
  /// dataset's columns.
  Schema schema;
  std::vector<std::vector<std::string>> levels;
  std::size_t target = 0;

  bool operator==(const Forest&) const = default;
};

/// Gini impurity 2p(1-p) of a node with `positives` of `n` rows positive.
double gini(std::size_t n, std::size_t positives);

/// Each feature is kept iff a fair die numbered 1..k (k = available.size())
/// shows at most floor(sqrt(k)). May return an empty set.
std::vector<std::size_t> dice_roll_features(std::span<const std::size_t> available, Rng& rng);

/// Best level bipartition for a binary outcome. Present levels are ordered by
/// positive rate (ties by code) and the k-1 contiguous cuts are scanned; the
/// lower-rate side goes left. Children must each hold >= min_bucket rows.
/// Returns nullopt with fewer than two present levels or no admissible cut.
std::optional<SplitCandidate> best_categorical_split(std::span<const std::size_t> rows,
                                                     std::span<const std::uint32_t> codes,
                                                     std::size_t n_levels,
                                                     std::span<const double> outcome,
                                                     std::size_t min_bucket = 1);

/// Best threshold, placed midway between consecutive distinct values; ties go
/// to the smaller threshold.
std::optional<SplitCandidate> best_numeric_split(std::span<const std::size_t> rows,
                                                 std::span<const double> values,
                                                 std::span<const double> outcome,
                                                 std::size_t min_bucket = 1);

/// Grows one tree on `rows` (repeats allowed, e.g. a bootstrap sample).
Tree fit_tree(const Dataset& d, std::span<const std::size_t> rows, const ForestParams& params,
              Rng& rng);
Tree fit_tree(const Dataset& d, const ForestParams& params, Rng& rng);

/// Tree i draws from the substream (params.seed, i), so the forest does not
/// depend on `workers`.
Forest fit_forest(const Dataset& d, const ForestParams& params, std::size_t workers = 1);

/// Mean leaf prediction over trees. Columns are matched by name; a level the
/// forest never saw goes right at level-set nodes. Throws SchemaError when a
/// split column is missing or has the wrong kind.
std::vector<double> predict_forest(const Forest& f, const Dataset& d);

/// Inspection format: nodes with explicit level-name sets.
nlohmann::json forest_to_json(const Forest& f);
Forest forest_from_json(const nlohmann::json& doc);

}  // namespace cofa
