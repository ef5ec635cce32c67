#include "cofa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include <boost/math/special_functions/beta.hpp>

#include "cofa/errors.hpp"
#include "cofa/parallel.hpp"
#include "cofa/random.hpp"
#include "cofa/text.hpp"

namespace cofa {

std::optional<double> auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum keeps midranks integral.
  std::int64_t twice_rank_sum = 0, n_pos = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end + 1 < n && scores[order[end + 1]] == scores[order[start]]) ++end;
    const auto twice_rank = static_cast<std::int64_t>(start + end + 2);
    for (std::size_t k = start; k <= end; ++k)
      if (labels[order[k]] > 0.5) {
        twice_rank_sum += twice_rank;
        ++n_pos;
      }
    start = end + 1;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const std::int64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

struct GroupAuc {
  std::uint32_t group;
  std::size_t size;
  std::optional<double> value;
};

std::vector<GroupAuc> group_aucs(std::span<const double> scores, std::span<const double> labels,
                                 std::span<const std::uint32_t> groups) {
  if (groups.size() != scores.size()) throw ConfigError("groups and scores differ in length");
  std::map<std::uint32_t, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < groups.size(); ++i) rows[groups[i]].push_back(i);
  std::vector<GroupAuc> out;
  std::vector<double> s, l;
  for (const auto& [g, idx] : rows) {
    s.clear();
    l.clear();
    for (auto i : idx) {
      s.push_back(scores[i]);
      l.push_back(labels[i]);
    }
    out.push_back({g, idx.size(), auc(s, l)});
  }
  return out;
}

double weighted_mean(const std::vector<GroupAuc>& parts) {
  double num = 0.0, den = 0.0;
  for (const auto& g : parts)
    if (g.value) {
      num += static_cast<double>(g.size) * *g.value;
      den += static_cast<double>(g.size);
    }
  if (den == 0.0) throw DataError("weighted AUC is undefined: every subgroup has a single class");
  return num / den;
}

}  // namespace

double weighted_auc(std::span<const double> scores, std::span<const double> labels,
                    std::span<const std::uint32_t> groups) {
  return weighted_mean(group_aucs(scores, labels, groups));
}

std::string AucSamples::key() const { return weighting ? procedure + "|" + *weighting : procedure; }

double student_t_sf(double t, double df) {
  if (!(df >= 1.0)) throw ConfigError("degrees of freedom must be at least 1");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  const double x = df / (df + t * t);
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

TTestResult corrected_resampled_t_test(std::span<const double> a, std::span<const double> b,
                                       double test_train_ratio) {
  if (a.size() != b.size()) throw ConfigError("paired samples differ in length");
  const std::size_t m = a.size();
  if (m < 2) throw ConfigError("the corrected t-test needs at least two iterations");
  if (!(test_train_ratio >= 0.0)) throw ConfigError("test/train ratio must be non-negative");
  TTestResult r;
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = a[i] - b[i];
  r.mean_diff = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean_diff) * (v - r.mean_diff);
  r.sigma_hat = std::sqrt(ss / static_cast<double>(m - 1));
  r.df = m - 1;
  if (r.sigma_hat == 0.0) {
    r.degenerate = true;
    if (r.mean_diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean_diff / (r.sigma_hat * std::sqrt(1.0 / static_cast<double>(m) + test_train_ratio));
  r.p = student_t_sf(r.t, static_cast<double>(r.df));
  return r;
}

TTestResult corrected_resampled_t_test(const AucSamples& a, const AucSamples& b) {
  if (a.n_test != b.n_test || a.n_train != b.n_train)
    throw ConfigError("samples '" + a.key() + "' and '" + b.key() + "' are not paired");
  if (a.n_train == 0) throw ConfigError("samples have no training rows");
  TTestResult r = corrected_resampled_t_test(
      a.values, b.values, static_cast<double>(a.n_test) / static_cast<double>(a.n_train));
  r.a = a.key();
  r.b = b.key();
  return r;
}

const AucSamples& EvaluationReport::find(const std::string& key) const {
  for (const auto& s : samples)
    if (s.key() == key) return s;
  throw ConfigError("no samples named '" + key + "'");
}

namespace {

struct IterationResult {
  std::vector<double> values;  // per sample slot
  // per sample slot: group code -> (size, auc)
  std::vector<std::vector<GroupAuc>> groups;
  std::size_t retries = 0;
};

}  // namespace

EvaluationReport repeated_subsampling(const Dataset& d, std::span<const Procedure> procedures,
                                      const SubsamplingOptions& options) {
  if (options.iterations < 2) throw ConfigError("sub-sampling needs at least two iterations");
  if (procedures.empty()) throw ConfigError("no procedures to evaluate");

  EvaluationReport report;
  report.iterations = options.iterations;
  report.train_fraction = options.train_fraction;
  report.seed = options.seed;

  struct Slot {
    std::size_t procedure;
    std::optional<std::size_t> column;
  };
  std::vector<Slot> slots;
  for (std::size_t p = 0; p < procedures.size(); ++p) {
    if (!procedures[p].fit_predict) throw ConfigError("procedure '" + procedures[p].name + "' has no recipe");
    AucSamples pooled;
    pooled.procedure = procedures[p].name;
    report.samples.push_back(pooled);
    slots.push_back({p, std::nullopt});
    for (const auto& w : procedures[p].weightings) {
      const std::size_t col = d.column_index(w);
      if (d.column(col).schema.kind != ColumnKind::categorical)
        throw SchemaError("weighting column '" + w + "' is not categorical");
      AucSamples weighted;
      weighted.procedure = procedures[p].name;
      weighted.weighting = w;
      report.samples.push_back(weighted);
      slots.push_back({p, col});
    }
  }
  for (std::size_t a = 0; a < report.samples.size(); ++a)
    for (std::size_t b = a + 1; b < report.samples.size(); ++b)
      if (report.samples[a].key() == report.samples[b].key())
        throw ConfigError("duplicate procedure '" + report.samples[a].key() + "'");

  const std::size_t n = d.n_rows();
  const auto& y = d.outcome().values;
  std::vector<IterationResult> results(options.iterations);
  parallel_for(options.iterations, options.workers, [&](std::size_t i) {
    IterationResult& res = results[i];
    RowSplit split;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > options.max_retries)
        throw DataError("could not draw a split with both outcome classes on each side");
      split = split_rows(n, options.train_fraction, derive_seed(options.seed, {stream::subsample, i, attempt}));
      auto side_ok = [&](const std::vector<std::size_t>& rows) {
        bool pos = false, neg = false;
        for (auto r : rows) (y[r] > 0.5 ? pos : neg) = true;
        return pos && neg;
      };
      if (side_ok(split.train) && side_ok(split.test)) break;
      ++res.retries;
    }
    const Dataset train = d.select_rows(split.train);
    const Dataset test = d.select_rows(split.test);
    const auto& labels = test.outcome().values;
    const std::uint64_t fit_seed = derive_seed(options.seed, {stream::subsample, i});

    res.values.resize(slots.size());
    res.groups.resize(slots.size());
    std::vector<std::vector<double>> scores(procedures.size());
    for (std::size_t p = 0; p < procedures.size(); ++p) {
      scores[p] = procedures[p].fit_predict(train, test, fit_seed);
      if (scores[p].size() != test.n_rows())
        throw NumericalError("procedure '" + procedures[p].name + "' returned the wrong number of scores");
    }
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const auto& sc = scores[slots[s].procedure];
      if (!slots[s].column) {
        res.values[s] = *auc(sc, labels);
        continue;
      }
      res.groups[s] = group_aucs(sc, labels, test.column(*slots[s].column).codes);
      res.values[s] = weighted_mean(res.groups[s]);
    }
  });

  // Every iteration has the same split sizes.
  const RowSplit shape = split_rows(n, options.train_fraction, 0);
  for (auto& s : report.samples) {
    s.n_train = shape.train.size();
    s.n_test = shape.test.size();
    s.values.reserve(options.iterations);
  }
  for (const auto& res : results) {
    report.retries += res.retries;
    for (std::size_t s = 0; s < slots.size(); ++s) report.samples[s].values.push_back(res.values[s]);
  }

  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s].column) continue;
    const Column& col = d.column(*slots[s].column);
    struct Acc {
      std::vector<double> values;
      double size = 0.0;
    };
    std::map<std::uint32_t, Acc> acc;
    for (const auto& res : results)
      for (const auto& g : res.groups[s]) {
        auto& a = acc[g.group];
        a.size += static_cast<double>(g.size);
        if (g.value) a.values.push_back(*g.value);
      }
    for (const auto& [code, a] : acc) {
      SubgroupSummary sum;
      sum.key = report.samples[s].key();
      sum.level = col.levels.at(code);
      sum.n_defined = a.values.size();
      sum.mean_size = a.size / static_cast<double>(options.iterations);
      if (!a.values.empty()) {
        const double k = static_cast<double>(a.values.size());
        sum.mean = std::accumulate(a.values.begin(), a.values.end(), 0.0) / k;
        double ss = 0.0;
        for (double v : a.values) ss += (v - sum.mean) * (v - sum.mean);
        sum.se = a.values.size() > 1 ? std::sqrt(ss / (k - 1.0)) / std::sqrt(k) : 0.0;
      } else {
        sum.mean = std::numeric_limits<double>::quiet_NaN();
        sum.se = std::numeric_limits<double>::quiet_NaN();
      }
      report.subgroups.push_back(std::move(sum));
    }
  }
  add_pairwise_tests(report);
  return report;
}

void add_pairwise_tests(EvaluationReport& report) {
  report.tests.clear();
  for (std::size_t a = 0; a < report.samples.size(); ++a)
    for (std::size_t b = a + 1; b < report.samples.size(); ++b)
      if (report.samples[a].weighting == report.samples[b].weighting)
        report.tests.push_back(corrected_resampled_t_test(report.samples[b], report.samples[a]));
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : report.samples) {
    double ss = 0.0;
    const double m = mean_of(s.values);
    for (double v : s.values) ss += (v - m) * (v - m);
    samples.push_back({{"key", s.key()},
                       {"procedure", s.procedure},
                       {"weighting", s.weighting ? nlohmann::json(*s.weighting) : nlohmann::json(nullptr)},
                       {"mean_auc", m},
                       {"sd_auc", std::sqrt(ss / static_cast<double>(s.values.size() - 1))},
                       {"n_train", s.n_train},
                       {"n_test", s.n_test}});
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : report.tests)
    tests.push_back({{"a", t.a},
                     {"b", t.b},
                     {"mean_diff", t.mean_diff},
                     {"sigma_hat", t.sigma_hat},
                     {"t", number_or_null(t.t)},
                     {"df", t.df},
                     {"p", t.p},
                     {"degenerate", t.degenerate}});
  return {{"iterations", report.iterations}, {"train_fraction", report.train_fraction},
          {"seed", report.seed},             {"retries", report.retries},
          {"samples", samples},              {"tests", tests}};
}

void write_iterations_csv(std::ostream& out, const EvaluationReport& report,
                          std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "iteration";
  for (const auto& s : report.samples) out << ',' << csv_field(s.key());
  out << '\n';
  for (std::size_t i = 0; i < report.iterations; ++i) {
    out << i + 1;
    for (const auto& s : report.samples) out << ',' << format_number(s.values.at(i));
    out << '\n';
  }
}

void write_tests_csv(std::ostream& out, const EvaluationReport& report,
                     std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "a,b,mean_diff,sigma_hat,t,df,p,degenerate\n";
  for (const auto& t : report.tests)
    out << csv_field(t.a) << ',' << csv_field(t.b) << ',' << format_number(t.mean_diff) << ','
        << format_number(t.sigma_hat) << ',' << format_number(t.t) << ',' << t.df << ','
        << format_number(t.p) << ',' << (t.degenerate ? 1 : 0) << '\n';
}

void write_subgroups_csv(std::ostream& out, const EvaluationReport& report,
                         std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "key,level,n_defined,mean_size,mean_auc,se_auc\n";
  for (const auto& s : report.subgroups)
    out << csv_field(s.key) << ',' << csv_field(s.level) << ',' << s.n_defined << ','
        << format_number(s.mean_size) << ',' << format_number(s.mean) << ',' << format_number(s.se)
        << '\n';
}

}  // namespace cofa
