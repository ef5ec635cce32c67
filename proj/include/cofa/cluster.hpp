#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cofa/cofrequency.hpp"
#include "cofa/matrix.hpp"

namespace cofa {

/// Agglomeration history. Cluster ids below n_levels are single levels; id
/// n_levels + m is the cluster formed by merge m.
struct Dendrogram {
  struct Merge {
    std::size_t a = 0;  // the side holding the smaller level index
    std::size_t b = 0;
    double height = 0.0;
    bool operator==(const Merge&) const = default;
  };
  std::vector<Merge> merges;
  std::vector<std::string> level_names;

  std::size_t n_levels() const noexcept { return level_names.size(); }
  /// Level indices under a cluster id, ascending.
  std::vector<std::size_t> members(std::size_t cluster) const;
};

/// Level -> group in 1..k, numbered by first appearance in level order.
struct ClusterAssignment {
  std::vector<std::string> level_names;
  std::vector<std::uint32_t> group;
  std::size_t k = 0;

  /// Zero-based mapping, the form add_mapped_column expects.
  std::vector<std::uint32_t> zero_based() const;
  std::vector<std::string> group_names() const;  // "G1".."Gk"
};

/// Complete linkage. Each step merges the two clusters with the smallest
/// maximum pairwise distance; ties go to the lexicographically smallest pair
/// of (smallest member level index).
Dendrogram complete_linkage(const SquareMatrix<double>& d, std::vector<std::string> level_names);
Dendrogram complete_linkage(const DistanceMatrix& d);

/// Undoes the last k-1 merges. Throws ConfigError unless 1 <= k <= n_levels.
ClusterAssignment cut_tree(const Dendrogram& dg, std::size_t k);

/// Newick text; branch length = parent height - child height. Names with
/// Newick delimiters are single-quoted.
std::string export_newick(const Dendrogram& dg);

struct NewickNode {
  std::string name;  // leaves only
  double branch_length = 0.0;
  std::vector<std::unique_ptr<NewickNode>> children;

  bool is_leaf() const noexcept { return children.empty(); }
};

/// Parses the subset of Newick that export_newick writes, plus [bracketed]
/// comments. Throws DataError.
std::unique_ptr<NewickNode> parse_newick(std::string_view text);

/// Merge table: a, b, height, with a/b rendered as level names for leaves
/// and "merge<m>" for internal clusters.
void write_merge_table_csv(std::ostream& out, const Dendrogram& dg,
                           std::span<const std::string> comments = {});
void write_assignment_csv(std::ostream& out, const ClusterAssignment& a,
                          std::span<const std::string> comments = {});
/// Two-column level,group CSV (groups 1-based) as written above.
ClusterAssignment read_assignment_csv(std::istream& in);

/// Chance-corrected agreement between two labelings of the same items.
double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

}  // namespace cofa
