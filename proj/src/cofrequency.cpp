#include "cofa/cofrequency.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "cofa/errors.hpp"
#include "cofa/parallel.hpp"
#include "cofa/random.hpp"
#include "cofa/text.hpp"

namespace cofa {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

PairCounts& PairCounts::operator+=(const PairCounts& other) {
  if (other.n_levels() != n_levels()) throw ConfigError("pair counts differ in level count");
  const std::size_t n = n_levels();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      same(i, j) += other.same(i, j);
      total(i, j) += other.total(i, j);
    }
  return *this;
}

PairCounts accumulate_pair_counts(const Tree& tree, std::size_t target, std::size_t n_levels) {
  PairCounts counts(n_levels);
  std::vector<std::uint32_t> left, right;
  for (const auto& node : tree.nodes) {
    if (!node.split || node.split->feature != target) continue;
    left.clear();
    right.clear();
    for (auto l : node.levels_present)
      (node.split->sends_level_left(l) ? left : right).push_back(l);

    auto bump_within = [&](const std::vector<std::uint32_t>& side) {
      for (std::size_t a = 0; a < side.size(); ++a)
        for (std::size_t b = a + 1; b < side.size(); ++b) {
          const auto i = side[a], j = side[b];
          ++counts.same(i, j);
          ++counts.same(j, i);
          ++counts.total(i, j);
          ++counts.total(j, i);
        }
    };
    bump_within(left);
    bump_within(right);
    for (auto i : left)
      for (auto j : right) {
        ++counts.total(i, j);
        ++counts.total(j, i);
      }
  }
  return counts;
}

CoFrequencyMatrix cofa_matrix(const PairCounts& counts, std::vector<std::string> level_names) {
  if (level_names.size() != counts.n_levels())
    throw ConfigError("level names do not match pair counts");
  CoFrequencyMatrix m;
  const std::size_t n = counts.n_levels();
  m.level_names = std::move(level_names);
  m.counts = counts;
  m.s = SquareMatrix<double>(n, kNaN);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && counts.total(i, j) > 0)
        m.s(i, j) = static_cast<double>(counts.same(i, j)) / static_cast<double>(counts.total(i, j));
  return m;
}

CoFrequencyMatrix cofa_matrix(const Forest& forest) {
  const auto& names = forest.levels.at(forest.target);
  PairCounts total(names.size());
  for (const auto& t : forest.trees) total += accumulate_pair_counts(t, forest.target, names.size());
  return cofa_matrix(total, names);
}

std::vector<double> NullDistribution::pair_samples(std::size_t i, std::size_t j) const {
  std::vector<double> out;
  for (const auto& s : samples)
    if (!std::isnan(s(i, j))) out.push_back(s(i, j));
  return out;
}

NullDistribution null_distribution(const Dataset& d, const ForestParams& params,
                                   std::size_t n_replicates, std::uint64_t seed,
                                   const NullOptions& options) {
  if (n_replicates < 2) throw ConfigError("the null distribution needs at least two replicates");
  params.validate();
  const Column& target_col = d.cluster_target();
  const std::size_t n = target_col.n_levels();

  std::vector<SquareMatrix<double>> reps(n_replicates);
  std::vector<std::size_t> trivial(n_replicates, 0);
  parallel_for(n_replicates, options.workers, [&](std::size_t r) {
    Column shuffled = target_col;
    Rng rng = make_rng(seed, {stream::null_permutation, r});
    std::shuffle(shuffled.codes.begin(), shuffled.codes.end(), rng);
    const Dataset permuted = d.with_column(std::move(shuffled));
    ForestParams p = params;
    p.seed = derive_seed(seed, {stream::null_forest, r});
    const Forest forest = fit_forest(permuted, p, 1);
    trivial[r] = forest.trivial_root_count;
    reps[r] = cofa_matrix(forest).s;
  });

  NullDistribution null;
  null.level_names = target_col.levels;
  null.n_replicates = n_replicates;
  null.mu = SquareMatrix<double>(n, kNaN);
  null.sigma = SquareMatrix<double>(n, kNaN);
  null.n_defined = SquareMatrix<std::size_t>(n, 0);
  for (auto t : trivial) null.trivial_root_count += t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      std::size_t k = 0;
      double sum = 0.0;
      for (const auto& s : reps)
        if (!std::isnan(s(i, j))) {
          ++k;
          sum += s(i, j);
        }
      null.n_defined.set_symmetric(i, j, k);
      if (k < 2) continue;
      const double mean = sum / static_cast<double>(k);
      double ss = 0.0;
      for (const auto& s : reps)
        if (!std::isnan(s(i, j))) ss += (s(i, j) - mean) * (s(i, j) - mean);
      null.mu.set_symmetric(i, j, mean);
      null.sigma.set_symmetric(i, j, std::sqrt(ss / static_cast<double>(k - 1)));
    }
  if (options.retain_samples) null.samples = std::move(reps);
  return null;
}

std::size_t SignificanceMask::n_significant() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < significant.size(); ++i)
    for (std::size_t j = i + 1; j < significant.size(); ++j) count += significant(i, j);
  return count;
}

double bonferroni_cutoff(double alpha, std::size_t n_tests) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (n_tests == 0) throw ConfigError("Bonferroni correction needs at least one test");
  const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(
      boost::math::complement(std_normal, alpha / (2.0 * static_cast<double>(n_tests))));
}

SignificanceMask significance_mask(const CoFrequencyMatrix& observed, const NullDistribution& null,
                                   double alpha) {
  const std::size_t n = observed.n_levels();
  if (null.n_levels() != n || null.level_names != observed.level_names)
    throw ConfigError("observed and null statistics use different level orderings");
  SignificanceMask mask;
  mask.alpha = alpha;
  mask.n_tests = n * (n - 1) / 2;
  mask.cutoff = mask.n_tests > 0 ? bonferroni_cutoff(alpha, mask.n_tests) : 0.0;
  mask.z = SquareMatrix<double>(n, kNaN);
  mask.significant = SquareMatrix<std::uint8_t>(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = observed.s(i, j);
      const double mu = null.mu(i, j);
      const double sigma = null.sigma(i, j);
      if (std::isnan(s) || std::isnan(mu) || std::isnan(sigma) || !(sigma > 0.0)) continue;
      const double z = (s - mu) / sigma;
      mask.z.set_symmetric(i, j, z);
      if (std::abs(z) > mask.cutoff) mask.significant.set_symmetric(i, j, 1);
    }
  return mask;
}

DistanceMatrix to_distance(const CoFrequencyMatrix& observed, const SignificanceMask& mask) {
  const std::size_t n = observed.n_levels();
  if (mask.significant.size() != n) throw ConfigError("mask and statistics differ in size");
  DistanceMatrix out;
  out.level_names = observed.level_names;
  out.d = SquareMatrix<double>(n, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    out.d(i, i) = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && mask.significant(i, j)) out.d(i, j) = 1.0 - observed.s(i, j);
  }
  return out;
}

void write_square_csv(std::ostream& out, std::span<const std::string> names,
                      const SquareMatrix<double>& m, std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "level";
  for (const auto& name : names) out << ',' << csv_field(name);
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << csv_field(names[i]);
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << format_number(m(i, j));
    out << '\n';
  }
}

SquareMatrix<double> read_square_csv(std::istream& in, std::vector<std::string>& names) {
  std::string line;
  std::vector<std::vector<std::string>> records;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    records.push_back(split_csv_record(line));
  }
  if (records.empty()) throw DataError("empty matrix file");
  names.assign(records.front().begin() + 1, records.front().end());
  const std::size_t n = names.size();
  if (records.size() != n + 1) throw DataError("matrix file is not square");
  SquareMatrix<double> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = records[i + 1];
    if (rec.size() != n + 1 || rec[0] != names[i])
      throw DataError("matrix row " + std::to_string(i + 1) + " does not match the header");
    for (std::size_t j = 0; j < n; ++j) {
      if (rec[j + 1] == "NA") {
        m(i, j) = kNaN;
        continue;
      }
      try {
        std::size_t used = 0;
        m(i, j) = std::stod(rec[j + 1], &used);
        if (used != rec[j + 1].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw DataError("matrix cell (" + names[i] + ", " + names[j] + ") is not a number");
      }
    }
  }
  return m;
}

void write_null_summary_csv(std::ostream& out, const NullDistribution& null,
                            std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "level_i,level_j,mu,sigma,n_defined\n";
  const std::size_t n = null.n_levels();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      out << csv_field(null.level_names[i]) << ',' << csv_field(null.level_names[j]) << ','
          << format_number(null.mu(i, j)) << ',' << format_number(null.sigma(i, j)) << ','
          << null.n_defined(i, j) << '\n';
}

}  // namespace cofa
