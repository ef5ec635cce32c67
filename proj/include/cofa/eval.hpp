#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofa/datamodel.hpp"

namespace cofa {

/// Mann-Whitney AUC with half credit for ties, via midranks. Empty when the
/// labels hold a single class.
std::optional<double> auc(std::span<const double> scores, std::span<const double> labels);

/// Per-group AUC averaged with group-size weights. Groups whose AUC is
/// undefined are left out and the weights renormalised; throws DataError
/// when no group is defined.
double weighted_auc(std::span<const double> scores, std::span<const double> labels,
                    std::span<const std::uint32_t> groups);

struct AucSamples {
  std::string procedure;
  std::optional<std::string> weighting;  // grouping column for weighted AUC
  std::vector<double> values;            // one per iteration
  std::size_t n_test = 0;
  std::size_t n_train = 0;

  std::size_t m() const noexcept { return values.size(); }
  std::string key() const;  // "procedure" or "procedure|column"
};

struct TTestResult {
  std::string a, b;
  double mean_diff = 0.0;
  double sigma_hat = 0.0;
  double t = 0.0;
  std::size_t df = 0;
  double p = 1.0;
  bool degenerate = false;  // sigma_hat == 0
};

/// Two-sided tail probability P(|T| >= |t|) for Student t with df degrees
/// of freedom.
double student_t_sf(double t, double df);

/// Paired test on x_i = a_i - b_i with variance inflated by
/// n_test / n_train: t = mean / (sd * sqrt(1/m + ratio)).
TTestResult corrected_resampled_t_test(std::span<const double> a, std::span<const double> b,
                                       double test_train_ratio);
TTestResult corrected_resampled_t_test(const AucSamples& a, const AucSamples& b);

/// A model recipe: trains on `train`, returns scores for the rows of `test`.
/// `seed` is shared by every procedure at a given iteration.
struct Procedure {
  std::string name;
  std::function<std::vector<double>(const Dataset& train, const Dataset& test, std::uint64_t seed)>
      fit_predict;
  /// Categorical columns to report weighted AUC over, besides pooled AUC.
  std::vector<std::string> weightings;
};

struct SubgroupSummary {
  std::string key;  // AucSamples::key()
  std::string level;
  std::size_t n_defined = 0;  // iterations with a defined AUC
  double mean_size = 0.0;     // mean test rows in the subgroup
  double mean = 0.0;
  double se = 0.0;
};

struct EvaluationReport {
  std::size_t iterations = 0;
  double train_fraction = 0.0;
  std::uint64_t seed = 0;
  std::size_t retries = 0;  // redrawn degenerate splits
  std::vector<AucSamples> samples;
  std::vector<TTestResult> tests;  // every pair sharing a weighting
  std::vector<SubgroupSummary> subgroups;

  const AucSamples& find(const std::string& key) const;
};

struct SubsamplingOptions {
  std::size_t iterations = 100;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t max_retries = 100;
};

/// Every procedure sees the same split sequence: iteration i, attempt r
/// uses substream (seed, i, r). A split whose train or test side has a
/// single outcome class is redrawn.
EvaluationReport repeated_subsampling(const Dataset& d, std::span<const Procedure> procedures,
                                      const SubsamplingOptions& options);

/// Fills report.tests with every pair of samples that share a weighting.
void add_pairwise_tests(EvaluationReport& report);

nlohmann::json report_to_json(const EvaluationReport& report);
/// iteration,<key>,<key>,...
void write_iterations_csv(std::ostream& out, const EvaluationReport& report,
                          std::span<const std::string> comments = {});
void write_tests_csv(std::ostream& out, const EvaluationReport& report,
                     std::span<const std::string> comments = {});
void write_subgroups_csv(std::ostream& out, const EvaluationReport& report,
                         std::span<const std::string> comments = {});

}  // namespace cofa
