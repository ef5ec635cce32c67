#pragma once

// Co-frequency analysis: how often two levels of the cluster target fall on
// the same side of the forest's level-set splits, tested against a
// permutation null and turned into a clustering distance.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cofa/datamodel.hpp"
#include "cofa/forest.hpp"
#include "cofa/matrix.hpp"

namespace cofa {

/// Per-pair node counts. `same` counts nodes that split on the target with
/// both levels present and on the same side; `total` counts nodes that split
/// on the target with both levels present. Diagonal unused.
struct PairCounts {
  SquareMatrix<std::uint64_t> same;
  SquareMatrix<std::uint64_t> total;

  PairCounts() = default;
  explicit PairCounts(std::size_t n_levels) : same(n_levels), total(n_levels) {}

  std::size_t n_levels() const noexcept { return same.size(); }
  /// Elementwise sum; counts from disjoint tree sets combine in any order.
  PairCounts& operator+=(const PairCounts& other);
  bool operator==(const PairCounts&) const = default;
};

/// Contribution of one tree: at each node splitting on `target` with
/// partition (L, R) of the levels present, pairs within L or within R add to
/// `same` and `total`; cross pairs add to `total` only.
PairCounts accumulate_pair_counts(const Tree& tree, std::size_t target, std::size_t n_levels);

struct CoFrequencyMatrix {
  std::vector<std::string> level_names;
  /// same / total; NaN where total is zero and on the diagonal.
  SquareMatrix<double> s;
  PairCounts counts;

  std::size_t n_levels() const noexcept { return level_names.size(); }
};

CoFrequencyMatrix cofa_matrix(const PairCounts& counts, std::vector<std::string> level_names);
CoFrequencyMatrix cofa_matrix(const Forest& forest);

struct NullOptions {
  bool retain_samples = false;
  std::size_t workers = 1;
};

/// Permutation null for s. Replicate r permutes the target column over rows
/// with substream (seed, r) and fits a forest with the observed parameters
/// but its own seed derived from (seed, r).
struct NullDistribution {
  std::vector<std::string> level_names;
  SquareMatrix<double> mu;     // NaN when fewer than two replicates define s
  SquareMatrix<double> sigma;  // sample standard deviation, same NaN rule
  SquareMatrix<std::size_t> n_defined;
  std::size_t n_replicates = 0;
  std::vector<SquareMatrix<double>> samples;  // per replicate, when retained
  std::size_t trivial_root_count = 0;         // summed over replicates

  std::size_t n_levels() const noexcept { return level_names.size(); }
  /// Replicate values of s for one pair where defined (needs samples).
  std::vector<double> pair_samples(std::size_t i, std::size_t j) const;
};

NullDistribution null_distribution(const Dataset& d, const ForestParams& params,
                                   std::size_t n_replicates, std::uint64_t seed,
                                   const NullOptions& options = {});

struct SignificanceMask {
  SquareMatrix<double> z;  // NaN when undefined
  double alpha = 0.05;
  std::size_t n_tests = 0;
  double cutoff = 0.0;
  SquareMatrix<std::uint8_t> significant;

  std::size_t n_significant() const;  // unordered pairs
};

/// |z| threshold for a two-sided test at alpha / n_tests.
double bonferroni_cutoff(double alpha, std::size_t n_tests);

/// z = (s - mu) / sigma per pair; n_tests = C(n_levels, 2). Pairs with
/// undefined s, undefined null, or sigma == 0 are not significant.
SignificanceMask significance_mask(const CoFrequencyMatrix& observed, const NullDistribution& null,
                                   double alpha = 0.05);

struct DistanceMatrix {
  std::vector<std::string> level_names;
  SquareMatrix<double> d;

  std::size_t n_levels() const noexcept { return level_names.size(); }
};

/// d = 1 - s for significant pairs, 0.5 otherwise, 0 on the diagonal.
DistanceMatrix to_distance(const CoFrequencyMatrix& observed, const SignificanceMask& mask);

/// Square CSV with a level-name header row and first column; NaN as "NA".
void write_square_csv(std::ostream& out, std::span<const std::string> names,
                      const SquareMatrix<double>& m, std::span<const std::string> comments = {});
/// Inverse of write_square_csv ("NA" -> NaN). Throws DataError.
SquareMatrix<double> read_square_csv(std::istream& in, std::vector<std::string>& names);

/// One line per unordered pair: level_i, level_j, mu, sigma, n_defined.
void write_null_summary_csv(std::ostream& out, const NullDistribution& null,
                            std::span<const std::string> comments = {});

}  // namespace cofa
