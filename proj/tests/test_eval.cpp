#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "cofa/errors.hpp"
#include "cofa/eval.hpp"
#include "cofa/glm.hpp"
#include "oracles/auc_oracle.hpp"
#include "support.hpp"

using namespace cofa;
using cofa::testing::categorical_column;
using cofa::testing::numeric_column;
using cofa::testing::outcome_column;

TEST_SUITE("auc") {
  TEST_CASE("hand examples") {
    const std::vector<double> y{0, 0, 1, 1};
    CHECK(*auc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, y) == 1.0);
    CHECK(*auc(std::vector<double>{0.4, 0.3, 0.2, 0.1}, y) == 0.0);
    CHECK(*auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y) == 0.5);
    CHECK(*auc(std::vector<double>{0.1, 0.3, 0.2, 0.4}, y) == 0.75);
    CHECK_FALSE(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 1}).has_value());
  }

  TEST_CASE("rank-sum equals pair counting, ties included") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t n = 2 + rng() % 120;
      const int grid = rep % 3 == 0 ? 3 : rep % 3 == 1 ? 20 : 1 << 20;
      std::vector<double> s(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng() % grid) / grid;
        y[i] = static_cast<double>(rng() % 2);
      }
      const auto a = auc(s, y);
      const auto b = oracle::pair_count_auc(s, y);
      REQUIRE(a.has_value() == b.has_value());
      if (a) CHECK(*a == *b);
    }
  }

  TEST_CASE("invariant to monotone transforms of the scores") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    std::vector<double> s(200), t(200), y(200);
    for (std::size_t i = 0; i < 200; ++i) {
      s[i] = z(rng);
      t[i] = std::exp(3 * s[i]) + 1;
      y[i] = static_cast<double>(rng() % 2);
    }
    CHECK(*auc(s, y) == *auc(t, y));
  }

  TEST_CASE("weighted AUC excludes undefined groups and renormalises") {
    // Group 0 (60 rows): AUC 0.7. Group 1 (40 rows): AUC 0.5.
    std::vector<double> s, y;
    std::vector<std::uint32_t> g;
    // 30 positives vs 30 negatives where 70% of pairs favour the positive.
    for (int i = 0; i < 30; ++i) {
      s.push_back(i < 21 ? 1.0 : 0.0);
      y.push_back(1);
      g.push_back(0);
    }
    for (int i = 0; i < 30; ++i) {
      s.push_back(0.5);
      y.push_back(0);
      g.push_back(0);
    }
    for (int i = 0; i < 40; ++i) {
      s.push_back(0.3);
      y.push_back(i % 2);
      g.push_back(1);
    }
    std::vector<double> s0(s.begin(), s.begin() + 60), y0(y.begin(), y.begin() + 60);
    REQUIRE(*auc(s0, y0) == doctest::Approx(0.7));
    CHECK(weighted_auc(s, y, g) == doctest::Approx(0.62));

    // A single-class group 2 drops out.
    for (int i = 0; i < 25; ++i) {
      s.push_back(0.9);
      y.push_back(0);
      g.push_back(2);
    }
    CHECK(weighted_auc(s, y, g) == doctest::Approx(0.62));

    const std::vector<double> one{1, 1};
    const std::vector<std::uint32_t> gg{0, 1};
    CHECK_THROWS_AS(weighted_auc(one, one, gg), DataError);
  }
}

TEST_SUITE("corrected t-test") {
  TEST_CASE("worked example") {
    // Differences with mean 0.01 and sample sd 0.02.
    std::vector<double> a(100), b(100, 0.0);
    for (std::size_t i = 0; i < 100; ++i) a[i] = 0.01 + (i % 2 ? 0.02 : -0.02) * std::sqrt(99.0 / 100.0);
    const TTestResult r = corrected_resampled_t_test(a, b, 0.25);
    CHECK(r.mean_diff == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(r.sigma_hat == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(r.t == doctest::Approx(0.9806).epsilon(1e-4));
    CHECK(std::abs(r.t - r.mean_diff / (r.sigma_hat * std::sqrt(0.01 + 0.25))) <= 1e-12);
    CHECK(r.df == 99);
  }

  TEST_CASE("tail probabilities") {
    CHECK(student_t_sf(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(student_t_sf(1.9842, 99.0) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(student_t_sf(0.0, 10.0) == 1.0);
    const boost::math::students_t_distribution<double> dist(7.0);
    for (double t : {0.3, 1.1, 2.5, 6.0})
      CHECK(student_t_sf(t, 7.0) == doctest::Approx(2 * boost::math::cdf(boost::math::complement(dist, t))).epsilon(1e-12));
    CHECK(student_t_sf(-2.0, 7.0) == student_t_sf(2.0, 7.0));
  }

  TEST_CASE("zero correction is the classical paired t; swapping flips the sign") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      a[i] = 0.7 + 0.02 * z(rng);
      b[i] = 0.69 + 0.02 * z(rng);
    }
    const TTestResult r = corrected_resampled_t_test(a, b, 0.0);
    double m = 0, ss = 0;
    for (std::size_t i = 0; i < 30; ++i) m += (a[i] - b[i]) / 30;
    for (std::size_t i = 0; i < 30; ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
    const double classical = m / (std::sqrt(ss / 29) / std::sqrt(30.0));
    CHECK(std::abs(r.t - classical) <= 1e-12 * std::abs(classical));
    const TTestResult s = corrected_resampled_t_test(b, a, 0.0);
    CHECK(s.t == doctest::Approx(-r.t).epsilon(1e-14));
    CHECK(s.p == doctest::Approx(r.p).epsilon(1e-14));
    CHECK(corrected_resampled_t_test(a, b, 0.25).p > r.p);
  }

  TEST_CASE("degenerate differences") {
    const std::vector<double> a{0.5, 0.6, 0.7}, same{0.5, 0.6, 0.7}, shifted{0.4, 0.5, 0.6};
    const TTestResult eq = corrected_resampled_t_test(a, same, 0.25);
    CHECK(eq.degenerate);
    CHECK(eq.p == 1.0);
    const TTestResult sh = corrected_resampled_t_test(a, shifted, 0.25);
    CHECK(sh.degenerate);
    CHECK(std::isinf(sh.t));
    CHECK(sh.p == 0.0);
    CHECK_THROWS(corrected_resampled_t_test(std::vector<double>{1.0}, std::vector<double>{0.5}, 0.25));
    CHECK_THROWS(corrected_resampled_t_test(a, std::vector<double>{0.5, 0.6}, 0.25));
  }
}

TEST_SUITE("sub-sampling") {
  Dataset cohort(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> id(n), x(n), y(n);
    std::vector<std::string> grp(n);
    for (std::size_t i = 0; i < n; ++i) {
      id[i] = static_cast<double>(i);
      x[i] = static_cast<double>(rng() % 1000) / 1000.0;
      y[i] = (rng() % 1000) / 1000.0 < 0.2 + 0.5 * x[i] ? 1.0 : 0.0;
      grp[i] = i % 3 == 0 ? "a" : i % 3 == 1 ? "b" : "c";
    }
    return Dataset({numeric_column("id", id), numeric_column("x", x), categorical_column("grp", grp, ColumnRole::cluster_target),
                    outcome_column(y)});
  }

  TEST_CASE("procedures share splits and seeds; results independent of workers") {
    const Dataset d = cohort(300, 1);
    std::mutex mu;
    std::map<std::pair<std::string, std::uint64_t>, std::set<double>> seen;
    auto recorder = [&](const std::string& name, bool use_x) {
      Procedure p;
      p.name = name;
      p.weightings = {"grp"};
      p.fit_predict = [&, name, use_x](const Dataset&, const Dataset& test, std::uint64_t seed) {
        const auto& ids = test.column("id").values;
        {
          std::lock_guard lock(mu);
          seen[{name, seed}] = std::set<double>(ids.begin(), ids.end());
        }
        return use_x ? test.column("x").values : std::vector<double>(test.n_rows(), 0.5);
      };
      return p;
    };
    const std::vector<Procedure> procs{recorder("model", true), recorder("flat", false)};
    SubsamplingOptions o;
    o.iterations = 12;
    o.seed = 4;
    const EvaluationReport one = repeated_subsampling(d, procs, o);
    std::size_t pairs = 0;
    for (const auto& [key, ids] : seen)
      if (key.first == "model") {
        CHECK(seen.at({"flat", key.second}) == ids);
        CHECK(ids.size() == 60);
        ++pairs;
      }
    CHECK(pairs == 12);

    o.workers = 4;
    const EvaluationReport four = repeated_subsampling(d, procs, o);
    REQUIRE(one.samples.size() == 4);
    for (std::size_t s = 0; s < 4; ++s) CHECK(one.samples[s].values == four.samples[s].values);
    CHECK(report_to_json(one).dump() == report_to_json(four).dump());

    const auto& flat = one.find("flat");
    for (double v : flat.values) CHECK(v == 0.5);
    CHECK(one.find("model|grp").m() == 12);
    CHECK(one.samples[0].n_test == 60);
    CHECK(one.samples[0].n_train == 240);
    CHECK(one.tests.size() == 2);
    CHECK_THROWS_AS(one.find("nope"), ConfigError);

    std::ostringstream it, tests, groups;
    write_iterations_csv(it, one);
    write_tests_csv(tests, one);
    write_subgroups_csv(groups, one);
    const std::string its = it.str(), gs = groups.str();
    CHECK(its.rfind("iteration,model,model|grp,flat,flat|grp\n", 0) == 0);
    CHECK(std::count(its.begin(), its.end(), '\n') == 13);
    CHECK(std::count(gs.begin(), gs.end(), '\n') == 7);
  }

  TEST_CASE("degenerate splits are redrawn, then give up") {
    std::vector<double> y(40, 0.0);
    y[0] = y[1] = 1.0;
    std::vector<double> id(40);
    std::iota(id.begin(), id.end(), 0.0);
    std::vector<std::string> dx(40);
    for (std::size_t i = 0; i < 40; ++i) dx[i] = i % 2 ? "a" : "b";
    const Dataset d({numeric_column("id", id), categorical_column("dx", dx, ColumnRole::cluster_target),
                     outcome_column(y)});
    Procedure p;
    p.name = "id";
    p.fit_predict = [](const Dataset&, const Dataset& test, std::uint64_t) { return test.column("id").values; };
    SubsamplingOptions o;
    o.iterations = 20;
    o.train_fraction = 0.5;
    const EvaluationReport r = repeated_subsampling(d, std::vector<Procedure>{p}, o);
    CHECK(r.retries > 0);
    o.max_retries = 0;
    o.iterations = 50;
    CHECK_THROWS_AS(repeated_subsampling(d, std::vector<Procedure>{p}, o), DataError);
  }

  TEST_CASE("configuration errors") {
    const Dataset d = cohort(50, 2);
    Procedure p;
    p.name = "p";
    p.fit_predict = [](const Dataset&, const Dataset& test, std::uint64_t) {
      return std::vector<double>(test.n_rows(), 0.1);
    };
    SubsamplingOptions o;
    o.iterations = 1;
    CHECK_THROWS_AS(repeated_subsampling(d, std::vector<Procedure>{p}, o), ConfigError);
    o.iterations = 3;
    CHECK_THROWS_AS(repeated_subsampling(d, std::vector<Procedure>{p, p}, o), ConfigError);
    Procedure w = p;
    w.weightings = {"x"};
    CHECK_THROWS_AS(repeated_subsampling(d, std::vector<Procedure>{w}, o), SchemaError);
  }

  TEST_CASE("recipes differing only in their internal seed are rarely called different") {
    auto recipe = [](std::string name, std::uint64_t offset) {
      Procedure p;
      p.name = std::move(name);
      p.fit_predict = [offset](const Dataset& train, const Dataset& test, std::uint64_t seed) {
        EncodeOptions o;
        o.target = TargetEncoding::exclude;
        PipelineOptions po;
        po.seed = seed + offset;
        po.lasso.n_lambda = 30;
        const LogisticModel m = fit_pipeline(encode(train, o), po);
        return m.predict(encode(test, o));
      };
      return p;
    };
    const std::vector<Procedure> procs{recipe("a", 0), recipe("b", 7777)};
    std::size_t rejected = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      SubsamplingOptions o;
      o.iterations = 10;
      o.seed = rep;
      const EvaluationReport r = repeated_subsampling(cohort(300, 100 + rep), procs, o);
      rejected += corrected_resampled_t_test(r.find("a"), r.find("b")).p < 0.05;
    }
    CHECK(rejected <= 5);
  }
}
