#include "cofa/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cofa/errors.hpp"
#include "cofa/parallel.hpp"
#include "cofa/random.hpp"

namespace cofa {

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_both_classes(std::span<const double> y) {
  if (y.size() < 2) throw DataError("logistic regression needs at least two rows");
  const double m = mean_of(y);
  if (m <= 0.0 || m >= 1.0) throw DataError("outcome has a single class");
}

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

class LassoSolver {
 public:
  LassoSolver(const DesignMatrix& x, const LassoOptions& options)
      : options_(options), y_(x.outcome), n_(x.n_rows()), p_(x.n_features()) {
    require_both_classes(y_);
    std_ = standardize(x);
    for (std::size_t j = 0; j < p_; ++j) {
      if (std_.scale[j] == 0.0) continue;
      usable_.push_back(j);
      std::vector<double> col(n_);
      for (std::size_t i = 0; i < n_; ++i) col[i] = (x.columns[j][i] - std_.mean[j]) / std_.scale[j];
      xs_.push_back(std::move(col));
    }
    const double ybar = mean_of(y_);
    null_intercept_ = std::log(ybar / (1.0 - ybar));
    for (const auto& col : xs_) {
      double g = 0.0;
      for (std::size_t i = 0; i < n_; ++i) g += col[i] * (y_[i] - ybar);
      lambda_max_ = std::max(lambda_max_, std::abs(g) / static_cast<double>(n_));
    }
    reset();
  }

  double lambda_max() const { return lambda_max_; }
  const Standardization& standardization() const { return std_; }

  void reset() {
    b_.assign(xs_.size(), 0.0);
    b0_ = null_intercept_;
    eta_.assign(n_, b0_);
  }

  void solve(double lambda) {
    passes_ = 0;
    if (lambda >= lambda_max_) {
      reset();
      return;
    }
    const std::size_t q = xs_.size();
    std::vector<double> w(n_), r(n_), v(q);
    for (std::size_t outer = 0; outer < 1000; ++outer) {
      const std::vector<double> b_old = b_;
      const double b0_old = b0_;
      const double obj_old = objective(lambda);

      double wsum = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double pi = logistic(eta_[i]);
        w[i] = std::max(pi * (1.0 - pi), 1e-5);
        r[i] = (y_[i] - pi) / w[i];
        wsum += w[i];
      }
      for (std::size_t k = 0; k < q; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += w[i] * xs_[k][i] * xs_[k][i];
        v[k] = s / static_cast<double>(n_);
      }
      inner_descent(lambda, w, wsum, v, r);

      refresh_eta();
      // Damp the step if the quadratic model overshot.
      for (int halving = 0; halving < 30 && objective(lambda) > obj_old + 1e-13; ++halving) {
        for (std::size_t k = 0; k < q; ++k) b_[k] = 0.5 * (b_[k] + b_old[k]);
        b0_ = 0.5 * (b0_ + b0_old);
        refresh_eta();
      }
      double change = std::abs(b0_ - b0_old);
      for (std::size_t k = 0; k < q; ++k) change = std::max(change, std::abs(b_[k] - b_old[k]));
      if (change < options_.tolerance) return;
    }
    throw NumericalError("lasso coordinate descent did not converge");
  }

  LassoFit result(double lambda) const {
    LassoFit fit;
    fit.lambda = lambda;
    fit.standardization = std_;
    fit.coefficients.assign(p_, 0.0);
    fit.passes = passes_;
    double shift = 0.0;
    for (std::size_t k = 0; k < xs_.size(); ++k) {
      if (b_[k] == 0.0) continue;
      const std::size_t j = usable_[k];
      fit.coefficients[j] = b_[k] / std_.scale[j];
      shift += fit.coefficients[j] * std_.mean[j];
      fit.support.push_back(j);
    }
    fit.intercept = b0_ - shift;
    return fit;
  }

 private:
  // Cyclic coordinate descent on the weighted least-squares model, sweeping
  // the active set until it settles, then confirming with a full sweep.
  void inner_descent(double lambda, std::span<const double> w, double wsum,
                     std::span<const double> v, std::vector<double>& r) {
    const std::size_t q = xs_.size();
    const double inv_n = 1.0 / static_cast<double>(n_);
    auto update = [&](std::size_t k) {
      if (v[k] <= 0.0) return 0.0;
      const auto& col = xs_[k];
      double g = 0.0;
      for (std::size_t i = 0; i < n_; ++i) g += w[i] * col[i] * r[i];
      g *= inv_n;
      const double nb = soft_threshold(g + v[k] * b_[k], lambda) / v[k];
      const double d = nb - b_[k];
      if (d == 0.0) return 0.0;
      for (std::size_t i = 0; i < n_; ++i) r[i] -= d * col[i];
      b_[k] = nb;
      return std::abs(d);
    };
    auto update_intercept = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += w[i] * r[i];
      const double d = s / wsum;
      for (std::size_t i = 0; i < n_; ++i) r[i] -= d;
      b0_ += d;
      return std::abs(d);
    };

    for (;;) {
      double change = update_intercept();
      for (std::size_t k = 0; k < q; ++k) change = std::max(change, update(k));
      ++passes_;
      if (change < options_.tolerance) return;
      for (;;) {
        double active_change = update_intercept();
        for (std::size_t k = 0; k < q; ++k)
          if (b_[k] != 0.0) active_change = std::max(active_change, update(k));
        if (++passes_ > options_.max_passes) throw NumericalError("lasso pass limit exceeded");
        if (active_change < options_.tolerance) break;
      }
    }
  }

  void refresh_eta() {
    std::fill(eta_.begin(), eta_.end(), b0_);
    for (std::size_t k = 0; k < xs_.size(); ++k) {
      if (b_[k] == 0.0) continue;
      for (std::size_t i = 0; i < n_; ++i) eta_[i] += b_[k] * xs_[k][i];
    }
  }

  double objective(double lambda) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < n_; ++i) loss += softplus(eta_[i]) - y_[i] * eta_[i];
    double pen = 0.0;
    for (double b : b_) pen += std::abs(b);
    return loss / static_cast<double>(n_) + lambda * pen;
  }

  LassoOptions options_;
  std::span<const double> y_;
  std::size_t n_, p_;
  Standardization std_;
  std::vector<std::size_t> usable_;
  std::vector<std::vector<double>> xs_;
  double null_intercept_ = 0.0;
  double lambda_max_ = 0.0;
  std::vector<double> b_;
  double b0_ = 0.0;
  std::vector<double> eta_;
  std::size_t passes_ = 0;
};

std::vector<double> default_lambdas(double lmax, const LassoOptions& options) {
  if (options.n_lambda < 1) throw ConfigError("lambda grid needs at least one value");
  if (!(options.lambda_min_ratio > 0.0 && options.lambda_min_ratio < 1.0))
    throw ConfigError("lambda_min_ratio must lie in (0,1)");
  // A degenerate lambda_max (no usable feature) still yields a valid grid.
  const double top = lmax > 0.0 ? lmax : 1.0;
  std::vector<double> out(options.n_lambda);
  for (std::size_t k = 0; k < options.n_lambda; ++k) {
    const double frac = options.n_lambda == 1 ? 0.0
                                              : static_cast<double>(k) / static_cast<double>(options.n_lambda - 1);
    out[k] = top * std::pow(options.lambda_min_ratio, frac);
  }
  out[0] = top;
  return out;
}

}  // namespace

Standardization standardize(const DesignMatrix& x) {
  Standardization s;
  const double n = static_cast<double>(x.n_rows());
  for (const auto& col : x.columns) {
    double m = 0.0;
    for (double v : col) m += v;
    m /= n;
    double ss = 0.0;
    for (double v : col) ss += (v - m) * (v - m);
    double sd = std::sqrt(ss / n);
    // Relative guard: a column whose spread is pure rounding is constant.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) sd = 0.0;
    s.mean.push_back(m);
    s.scale.push_back(sd);
  }
  return s;
}

double lambda_max(const DesignMatrix& x) { return LassoSolver(x, {}).lambda_max(); }

LambdaPath lasso_path(const DesignMatrix& x, std::span<const double> lambdas,
                      const LassoOptions& options) {
  LassoSolver solver(x, options);
  LambdaPath path;
  path.feature_names = x.names;
  path.lambda_max = solver.lambda_max();
  if (lambdas.empty()) {
    path.lambdas = default_lambdas(path.lambda_max, options);
  } else {
    path.lambdas.assign(lambdas.begin(), lambdas.end());
    for (std::size_t k = 0; k < path.lambdas.size(); ++k) {
      if (!(path.lambdas[k] >= 0.0)) throw ConfigError("lambdas must be non-negative");
      if (k > 0 && !(path.lambdas[k] < path.lambdas[k - 1]))
        throw ConfigError("lambdas must be strictly decreasing");
    }
  }
  path.fits.reserve(path.lambdas.size());
  for (double lambda : path.lambdas) {
    solver.solve(lambda);
    path.fits.push_back(solver.result(lambda));
  }
  return path;
}

LassoFit lasso_fit(const DesignMatrix& x, double lambda, const LassoOptions& options) {
  LassoSolver solver(x, options);
  solver.solve(lambda);
  return solver.result(lambda);
}

double binomial_deviance(std::span<const double> y, std::span<const double> p) {
  constexpr double eps = 1e-15;
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pi = std::clamp(p[i], eps, 1.0 - eps);
    dev -= y[i] > 0.5 ? std::log(pi) : std::log(1.0 - pi);
  }
  return 2.0 * dev / static_cast<double>(y.size());
}

std::vector<std::uint32_t> assign_folds(std::span<const double> y, std::size_t n_folds,
                                        std::uint64_t seed, bool* stratified) {
  if (n_folds < 2) throw ConfigError("cross-validation needs at least two folds");
  const std::size_t n = y.size();
  if (n < n_folds) throw DataError("fewer rows than folds");
  Rng rng = make_rng(seed, {stream::cv_folds});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint32_t> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[order[k]] = static_cast<std::uint32_t>(k % n_folds);

  std::size_t total_pos = 0;
  for (double v : y) total_pos += v > 0.5;
  auto valid = [&] {
    std::vector<std::size_t> pos(n_folds, 0), cnt(n_folds, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[fold[i]];
      pos[fold[i]] += y[i] > 0.5;
    }
    for (std::size_t f = 0; f < n_folds; ++f) {
      if (pos[f] == 0 || pos[f] == cnt[f]) return false;
      const std::size_t rest = n - cnt[f], rest_pos = total_pos - pos[f];
      if (rest_pos == 0 || rest_pos == rest) return false;
    }
    return true;
  };
  if (stratified) *stratified = false;
  if (valid()) return fold;

  if (stratified) *stratified = true;
  std::size_t next_pos = 0, next_neg = 0;
  for (auto i : order) {
    if (y[i] > 0.5)
      fold[i] = static_cast<std::uint32_t>(next_pos++ % n_folds);
    else
      fold[i] = static_cast<std::uint32_t>(next_neg++ % n_folds);
  }
  if (!valid())
    throw DataError("cannot build " + std::to_string(n_folds) +
                    " cross-validation folds that all contain both classes");
  return fold;
}

CvSelection cv_select_lambda(const DesignMatrix& x, LambdaPath& path, std::size_t n_folds,
                             std::uint64_t seed, const LassoOptions& options, std::size_t workers) {
  CvSelection sel;
  const auto fold = assign_folds(x.outcome, n_folds, seed, &sel.stratified);
  const std::size_t n_lambda = path.lambdas.size();
  std::vector<std::vector<double>> dev(n_folds, std::vector<double>(n_lambda));

  parallel_for(n_folds, workers, [&](std::size_t f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    const DesignMatrix xtr = x.select_rows(train);
    const DesignMatrix xte = x.select_rows(test);
    const LambdaPath fp = lasso_path(xtr, path.lambdas, options);
    std::vector<double> p(test.size());
    for (std::size_t k = 0; k < n_lambda; ++k) {
      const LassoFit& fit = fp.fits[k];
      for (std::size_t i = 0; i < test.size(); ++i) {
        double eta = fit.intercept;
        for (auto j : fit.support) eta += fit.coefficients[j] * xte.columns[j][i];
        p[i] = logistic(eta);
      }
      dev[f][k] = binomial_deviance(xte.outcome, p);
    }
  });

  path.cv_mean.assign(n_lambda, 0.0);
  path.cv_se.assign(n_lambda, 0.0);
  const double k_folds = static_cast<double>(n_folds);
  for (std::size_t k = 0; k < n_lambda; ++k) {
    double m = 0.0;
    for (std::size_t f = 0; f < n_folds; ++f) m += dev[f][k];
    m /= k_folds;
    double ss = 0.0;
    for (std::size_t f = 0; f < n_folds; ++f) ss += (dev[f][k] - m) * (dev[f][k] - m);
    path.cv_mean[k] = m;
    path.cv_se[k] = std::sqrt(ss / (k_folds - 1.0)) / std::sqrt(k_folds);
  }
  sel.min_index = static_cast<std::size_t>(
      std::min_element(path.cv_mean.begin(), path.cv_mean.end()) - path.cv_mean.begin());
  const double bound = path.cv_mean[sel.min_index] + path.cv_se[sel.min_index];
  sel.index = sel.min_index;
  for (std::size_t k = 0; k < sel.min_index; ++k)
    if (path.cv_mean[k] <= bound) {
      sel.index = k;
      break;
    }
  sel.lambda = path.lambdas[sel.index];
  return sel;
}

// --- maximum likelihood refit -------------------------------------------

std::vector<double> LogisticModel::predict(const DesignMatrix& x) const {
  std::vector<std::size_t> column(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto& name = feature_names[support[s]];
    auto it = std::find(x.names.begin(), x.names.end(), name);
    if (it == x.names.end()) throw SchemaError("design matrix lacks feature '" + name + "'");
    column[s] = static_cast<std::size_t>(it - x.names.begin());
  }
  std::vector<double> out(x.n_rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double eta = intercept;
    for (std::size_t s = 0; s < support.size(); ++s) eta += coefficients[support[s]] * x.columns[column[s]][i];
    out[i] = logistic(eta);
  }
  return out;
}

LogisticModel intercept_only(const DesignMatrix& x, std::string note) {
  LogisticModel m;
  m.feature_names = x.names;
  m.coefficients.assign(x.n_features(), 0.0);
  m.note = std::move(note);
  const double n = static_cast<double>(x.n_rows());
  const double events = std::accumulate(x.outcome.begin(), x.outcome.end(), 0.0);
  double p = n > 0 ? events / n : 0.5;
  if (!(p > 0.0 && p < 1.0)) p = (events + 0.5) / (n + 1.0);
  m.intercept = std::log(p / (1.0 - p));
  return m;
}

LogisticModel refit_mle(const DesignMatrix& x, std::span<const std::size_t> support,
                        const RefitOptions& options) {
  for (auto j : support)
    if (j >= x.n_features()) throw ConfigError("support index out of range");
  const std::size_t n = x.n_rows();
  if (n == 0) throw DataError("cannot fit a model on zero rows");

  const Standardization st = standardize(x);
  std::vector<std::size_t> cols;
  for (auto j : support)
    if (st.scale[j] > 0.0) cols.push_back(j);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

  LogisticModel m = intercept_only(x);
  const double ybar = std::accumulate(x.outcome.begin(), x.outcome.end(), 0.0) / static_cast<double>(n);
  if (!(ybar > 0.0 && ybar < 1.0)) {
    m.converged = false;
    m.note = "outcome has a single class";
    return m;
  }
  if (cols.empty()) return m;

  const std::size_t q = cols.size() + 1;
  Eigen::MatrixXd z(n, q);
  for (std::size_t i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    for (std::size_t k = 0; k < cols.size(); ++k)
      z(i, k + 1) = (x.columns[cols[k]][i] - st.mean[cols[k]]) / st.scale[cols[k]];
  }
  const Eigen::Map<const Eigen::VectorXd> y(x.outcome.data(), static_cast<Eigen::Index>(n));
  auto loglik = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = z * beta;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  beta(0) = std::log(ybar / (1.0 - ybar));
  double ll = loglik(beta);
  bool settled = false;
  m.converged = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    m.iterations = it + 1;
    const Eigen::VectorXd eta = z * beta;
    Eigen::VectorXd resid(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(eta(i));
      resid(i) = y(i) - p;
      w(i) = p * (1.0 - p);
    }
    const Eigen::VectorXd grad = z.transpose() * resid;
    const Eigen::MatrixXd hess = z.transpose() * w.asDiagonal() * z;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      m.note = "singular information matrix";
      break;
    }
    Eigen::VectorXd next = beta + step;
    double ll_next = loglik(next);
    for (int h = 0; h < 40 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++h) {
      step *= 0.5;
      next = beta + step;
      ll_next = loglik(next);
    }
    if (next.tail(q - 1).cwiseAbs().maxCoeff() > options.separation_bound) {
      m.note = "quasi-separation: coefficient bound exceeded";
      break;
    }
    const double change = ll_next - ll;
    beta = next;
    ll = ll_next;
    if (std::abs(change) < options.loglik_tolerance) {
      // One extra Newton step after the likelihood settles polishes the
      // gradient.
      if (settled) {
        m.converged = true;
        break;
      }
      settled = true;
    }
  }
  if (!m.converged && m.note.empty()) m.note = "iteration limit reached";

  double shift = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const std::size_t j = cols[k];
    m.coefficients[j] = beta(static_cast<Eigen::Index>(k + 1)) / st.scale[j];
    shift += m.coefficients[j] * st.mean[j];
    m.support.push_back(j);
  }
  m.intercept = beta(0) - shift;
  return m;
}

LogisticModel fit_pipeline(const DesignMatrix& x, const PipelineOptions& options) {
  LambdaPath path = lasso_path(x, {}, options.lasso);
  const CvSelection sel = cv_select_lambda(x, path, options.n_folds, options.seed, options.lasso,
                                           options.workers);
  LogisticModel m = refit_mle(x, path.fits[sel.index].support, options.refit);
  m.lambda = sel.lambda;
  m.fold_seed = options.seed;
  return m;
}

// --- clusterwise ----------------------------------------------------------

ClusterwiseModel fit_clusterwise(const DesignMatrix& x, const PipelineOptions& options,
                                 std::size_t min_rows, std::string stratifier) {
  if (!x.group_labels) throw ConfigError("clusterwise fitting needs group labels");
  ClusterwiseModel cw;
  cw.stratifier = std::move(stratifier);
  cw.strata_names = x.group_names;
  cw.global_fallback = intercept_only(x, "global intercept-only fallback");

  std::map<std::uint32_t, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < x.n_rows(); ++i) rows[(*x.group_labels)[i]].push_back(i);

  PipelineOptions inner = options;
  for (const auto& [stratum, idx] : rows) {
    const DesignMatrix xs = x.select_rows(idx);
    const double events = std::accumulate(xs.outcome.begin(), xs.outcome.end(), 0.0);
    std::string reason;
    if (idx.size() < min_rows)
      reason = "fewer than " + std::to_string(min_rows) + " rows";
    else if (events == 0.0 || events == static_cast<double>(idx.size()))
      reason = "single-class outcome";
    if (reason.empty()) {
      try {
        cw.submodels.emplace(stratum, fit_pipeline(xs, inner));
        continue;
      } catch (const DataError& e) {
        reason = e.what();
      }
    }
    cw.fallbacks.emplace(stratum, reason);
    cw.submodels.emplace(stratum, intercept_only(xs, "fallback: " + reason));
  }
  return cw;
}

std::vector<double> ClusterwiseModel::predict(const DesignMatrix& x) const {
  if (!x.group_labels) throw SchemaError("clusterwise prediction needs group labels");
  std::vector<std::optional<std::uint32_t>> stratum_of(x.group_names.size());
  for (std::size_t g = 0; g < x.group_names.size(); ++g) {
    auto it = std::find(strata_names.begin(), strata_names.end(), x.group_names[g]);
    if (it != strata_names.end()) stratum_of[g] = static_cast<std::uint32_t>(it - strata_names.begin());
  }
  std::map<const LogisticModel*, std::vector<std::size_t>> routed;
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    const auto s = stratum_of.at((*x.group_labels)[i]);
    const LogisticModel* m = &global_fallback;
    if (s) {
      auto it = submodels.find(*s);
      if (it != submodels.end()) m = &it->second;
    }
    routed[m].push_back(i);
  }
  std::vector<double> out(x.n_rows());
  for (const auto& [model, idx] : routed) {
    const auto p = model->predict(x.select_rows(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = p[k];
  }
  return out;
}

nlohmann::json model_to_json(const LogisticModel& m) {
  nlohmann::json coefs = nlohmann::json::object();
  for (auto j : m.support) coefs[m.feature_names[j]] = m.coefficients[j];
  nlohmann::json doc = {{"features", m.feature_names},
                        {"intercept", m.intercept},
                        {"coefficients", coefs},
                        {"converged", m.converged},
                        {"iterations", m.iterations},
                        {"fold_seed", m.fold_seed}};
  doc["lambda"] = m.lambda ? nlohmann::json(*m.lambda) : nlohmann::json(nullptr);
  if (!m.note.empty()) doc["note"] = m.note;
  return doc;
}

nlohmann::json model_to_json(const ClusterwiseModel& m) {
  nlohmann::json strata = nlohmann::json::array();
  for (const auto& [s, model] : m.submodels) {
    nlohmann::json entry = {{"stratum", m.strata_names.at(s)}, {"model", model_to_json(model)}};
    if (auto it = m.fallbacks.find(s); it != m.fallbacks.end()) entry["fallback_reason"] = it->second;
    strata.push_back(std::move(entry));
  }
  return {{"stratifier", m.stratifier},
          {"strata", strata},
          {"global_fallback", model_to_json(m.global_fallback)}};
}

}  // namespace cofa
