#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofa/datamodel.hpp"

namespace cofa {

// Penalised logistic regression. The LASSO objective, on standardised
// features x_j (mean 0, population variance 1), is
//
//   (1/n) sum_i [log(1 + exp(eta_i)) - y_i eta_i] + lambda * sum_j |b_j|
//
// with an unpenalised intercept. Coefficients are reported on the original
// feature scale.

struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a constant column, which stays out
};

Standardization standardize(const DesignMatrix& x);

struct LassoOptions {
  std::size_t n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  /// Converged when no standardised coefficient moves more than this.
  double tolerance = 1e-7;
  std::size_t max_passes = 100000;
};

struct LassoFit {
  double lambda = 0.0;
  std::vector<double> coefficients;  // original scale, one per feature
  double intercept = 0.0;
  std::vector<std::size_t> support;  // non-zero coefficients, ascending
  Standardization standardization;
  std::size_t passes = 0;
};

struct LambdaPath {
  std::vector<std::string> feature_names;
  double lambda_max = 0.0;
  std::vector<double> lambdas;  // strictly decreasing
  std::vector<LassoFit> fits;
  std::vector<double> cv_mean;  // filled by cv_select_lambda
  std::vector<double> cv_se;
};

/// max_j |<x_j, y - ybar>| / n over standardised features.
double lambda_max(const DesignMatrix& x);

/// Warm-started coordinate descent along `lambdas` (decreasing), or along
/// the default grid of n_lambda log-spaced values from lambda_max down to
/// lambda_max * lambda_min_ratio. Throws DataError if y has a single class.
LambdaPath lasso_path(const DesignMatrix& x, std::span<const double> lambdas = {},
                      const LassoOptions& options = {});

/// Single cold-started fit.
LassoFit lasso_fit(const DesignMatrix& x, double lambda, const LassoOptions& options = {});

/// Mean binomial deviance -2/n sum [y log p + (1-y) log(1-p)].
double binomial_deviance(std::span<const double> y, std::span<const double> p);

struct CvSelection {
  std::size_t index = 0;      // chosen by the 1-SE rule
  std::size_t min_index = 0;  // minimiser of cv_mean
  double lambda = 0.0;
  bool stratified = false;    // random folds lacked a class and were redealt
};

/// Fold assignment: seeded shuffle dealt round robin; if any fold, or any
/// fold's complement, misses a class the rows are redealt stratified by
/// class. Throws DataError when even that cannot give both classes
/// everywhere.
std::vector<std::uint32_t> assign_folds(std::span<const double> y, std::size_t n_folds,
                                        std::uint64_t seed, bool* stratified = nullptr);

/// Fills path.cv_mean / cv_se with held-out deviance and returns the largest
/// lambda whose mean is within one standard error of the minimum.
CvSelection cv_select_lambda(const DesignMatrix& x, LambdaPath& path, std::size_t n_folds,
                             std::uint64_t seed, const LassoOptions& options = {},
                             std::size_t workers = 1);

struct LogisticModel {
  std::vector<std::string> feature_names;  // full design layout
  std::vector<double> coefficients;        // zero outside the support
  std::vector<std::size_t> support;
  double intercept = 0.0;
  bool converged = true;
  std::size_t iterations = 0;
  std::optional<double> lambda;
  std::uint64_t fold_seed = 0;
  std::string note;

  /// Features are matched by name; throws SchemaError when a support feature
  /// is missing from x.
  std::vector<double> predict(const DesignMatrix& x) const;
};

struct RefitOptions {
  double loglik_tolerance = 1e-10;
  std::size_t max_iterations = 50;
  /// Larger |coefficient * feature sd| is treated as quasi-separation.
  double separation_bound = 15.0;
};

/// Unpenalised maximum likelihood on `support` by Newton-Raphson. Empty
/// support gives the intercept-only model logit(ybar). On quasi-separation
/// the last iterate inside the bound is kept and converged is false.
LogisticModel refit_mle(const DesignMatrix& x, std::span<const std::size_t> support,
                        const RefitOptions& options = {});

/// Intercept-only model; a single-class y uses (events + 0.5) / (n + 1).
LogisticModel intercept_only(const DesignMatrix& x, std::string note = {});

struct PipelineOptions {
  std::size_t n_folds = 5;
  std::uint64_t seed = 0;
  LassoOptions lasso;
  RefitOptions refit;
  std::size_t workers = 1;
};

/// lasso_path, then cv_select_lambda, then refit_mle on the selected support.
LogisticModel fit_pipeline(const DesignMatrix& x, const PipelineOptions& options = {});

struct ClusterwiseModel {
  std::string stratifier;
  std::vector<std::string> strata_names;
  std::map<std::uint32_t, LogisticModel> submodels;  // every stratum seen in training
  std::map<std::uint32_t, std::string> fallbacks;    // stratum -> reason
  LogisticModel global_fallback;                     // intercept-only, all rows

  /// Rows are routed by x.group_labels, matched to strata by name. A stratum
  /// without a submodel uses global_fallback.
  std::vector<double> predict(const DesignMatrix& x) const;
};

/// fit_pipeline per stratum of x.group_labels with the same options (so a
/// single stratum reproduces the global fit). Strata with fewer than
/// `min_rows` rows, a single class, or unusable cross-validation folds get
/// an intercept-only fallback with the reason recorded.
ClusterwiseModel fit_clusterwise(const DesignMatrix& x, const PipelineOptions& options = {},
                                 std::size_t min_rows = 50, std::string stratifier = {});

nlohmann::json model_to_json(const LogisticModel& m);
nlohmann::json model_to_json(const ClusterwiseModel& m);

double logistic(double eta);

}  // namespace cofa
