#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cofa/errors.hpp"
#include "cofa/forest.hpp"
#include "oracles/gini_oracle.hpp"
#include "support.hpp"

using namespace cofa;
using namespace cofa::testing;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Planted data: target levels 0..5 with rising rates, two numerics, one
// noise categorical.
Dataset planted(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> z;
  std::vector<std::uint32_t> dx(n), noise(n);
  std::vector<double> a(n), b(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = static_cast<std::uint32_t>(rng() % 6);
    noise[i] = static_cast<std::uint32_t>(rng() % 3);
    a[i] = z(rng);
    b[i] = std::round(z(rng) * 4) / 4;
    const double eta = -1.5 + 0.5 * dx[i] + 0.8 * a[i];
    y[i] = u(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0;
  }
  return Dataset({numeric_column("a", a), numeric_column("b", b), coded_column("noise", noise, 3),
                  coded_column("dx", dx, 6, ColumnRole::cluster_target), outcome_column(y)});
}

void check_tree_invariants(const Tree& t, const Dataset& d, std::span<const std::size_t> rows,
                           const ForestParams& p) {
  REQUIRE(!t.nodes.empty());
  const std::size_t target = d.target_index();
  // Route every row and rebuild node membership.
  std::vector<std::vector<std::size_t>> members(t.nodes.size());
  for (auto r : rows) {
    std::size_t id = t.root;
    members[id].push_back(r);
    while (!t.nodes[id].is_leaf()) {
      const auto& rule = *t.nodes[id].split;
      const Column& c = d.column(rule.feature);
      const bool left = rule.kind == SplitKind::level_set ? rule.sends_level_left(c.codes[r])
                                                          : c.values[r] < rule.threshold;
      id = left ? t.nodes[id].children->first : t.nodes[id].children->second;
      members[id].push_back(r);
    }
  }
  std::size_t leaf_rows = 0;
  for (const auto& node : t.nodes) {
    CHECK(node.split.has_value() == node.children.has_value());
    CHECK(node.n_node == members[node.id].size());
    std::set<std::uint32_t> lv;
    std::size_t pos = 0;
    for (auto r : members[node.id]) {
      lv.insert(d.cluster_target().codes[r]);
      pos += d.outcome().values[r] > 0.5;
    }
    CHECK(node.n_positive == pos);
    CHECK(std::vector<std::uint32_t>(lv.begin(), lv.end()) == node.levels_present);
    CHECK(node.depth <= p.max_depth);
    if (node.is_leaf()) {
      leaf_rows += node.n_node;
      continue;
    }
    const auto& l = t.nodes[node.children->first];
    const auto& r = t.nodes[node.children->second];
    CHECK(l.n_node + r.n_node == node.n_node);
    CHECK(l.n_node >= p.min_bucket);
    CHECK(r.n_node >= p.min_bucket);
    CHECK(node.n_node >= p.min_split);
    CHECK(l.depth == node.depth + 1);
    if (node.split->feature == target) {
      const auto& left = node.split->left_levels;
      CHECK(!left.empty());
      CHECK(std::is_sorted(left.begin(), left.end()));
      for (auto lvl : l.levels_present)
        CHECK(std::binary_search(left.begin(), left.end(), lvl));
      for (auto lvl : left) CHECK(std::binary_search(node.levels_present.begin(),
                                                     node.levels_present.end(), lvl));
      CHECK(left.size() < node.levels_present.size());
    }
  }
  CHECK(leaf_rows == rows.size());
}

}  // namespace

TEST_SUITE("dice roll") {
  TEST_CASE("k=1 always keeps the feature") {
    Rng rng(1);
    const std::vector<std::size_t> one{7};
    for (int i = 0; i < 1000; ++i) CHECK(dice_roll_features(one, rng) == one);
  }

  TEST_CASE("k=4 keeps each feature half the time") {
    Rng rng(2);
    const std::vector<std::size_t> four{0, 1, 2, 3};
    std::size_t kept = 0;
    const std::size_t rolls = 100000;
    for (std::size_t i = 0; i < rolls / 4; ++i) kept += dice_roll_features(four, rng).size();
    CHECK(std::abs(static_cast<double>(kept) / rolls - 0.5) <= 0.01);
  }

  TEST_CASE("k=24 empty-set rate matches the closed form") {
    Rng rng(3);
    std::vector<std::size_t> feats(24);
    std::iota(feats.begin(), feats.end(), 0);
    std::size_t empty = 0;
    for (int i = 0; i < 100000; ++i) empty += dice_roll_features(feats, rng).empty();
    const double expected = std::pow(1.0 - 4.0 / 24.0, 24);
    CHECK(expected == doctest::Approx(0.0126).epsilon(0.01));
    CHECK(std::abs(empty / 100000.0 - expected) <= 0.005);
  }

  TEST_CASE("empty input gives empty output") {
    Rng rng(4);
    CHECK(dice_roll_features({}, rng).empty());
  }
}

TEST_SUITE("splits") {
  TEST_CASE("gini") {
    CHECK(gini(0, 0) == 0.0);
    CHECK(gini(4, 2) == 0.5);
    CHECK(gini(10, 10) == 0.0);
  }

  TEST_CASE("pure levels split apart") {
    const std::vector<std::uint32_t> codes{0, 0, 1, 1, 1};
    const std::vector<double> y{1, 1, 0, 0, 0};
    const auto rows = all_rows(5);
    const auto s = best_categorical_split(rows, codes, 2, y);
    REQUIRE(s);
    CHECK(s->rule.left_levels == std::vector<std::uint32_t>{1});  // lower rate goes left
    CHECK(s->improvement == doctest::Approx(gini(5, 2)));
    CHECK(s->n_left == 3);
  }

  TEST_CASE("identical rates give zero improvement") {
    const std::vector<std::uint32_t> codes{0, 0, 1, 1, 2, 2};
    const std::vector<double> y{1, 0, 0, 1, 1, 0};
    const auto s = best_categorical_split(all_rows(6), codes, 3, y);
    REQUIRE(s);
    CHECK(s->improvement == 0.0);
    CHECK(s->rule.left_levels.front() == 0);
  }

  TEST_CASE("single present level or min_bucket gives none") {
    const std::vector<std::uint32_t> codes{2, 2, 2};
    const std::vector<double> y{1, 0, 1};
    CHECK_FALSE(best_categorical_split(all_rows(3), codes, 3, y));
    const std::vector<std::uint32_t> two{0, 1, 1};
    CHECK_FALSE(best_categorical_split(all_rows(3), two, 2, y, 2));
  }

  TEST_CASE("numeric threshold at the midpoint") {
    const std::vector<double> x{1, 2, 3, 4}, y{0, 0, 1, 1};
    const auto s = best_numeric_split(all_rows(4), x, y);
    REQUIRE(s);
    CHECK(s->rule.threshold == 2.5);
    CHECK(s->improvement == doctest::Approx(0.5));
    const std::vector<double> flat{3, 3, 3, 3};
    CHECK_FALSE(best_numeric_split(all_rows(4), flat, y));
  }

  TEST_CASE("numeric ties go to the smaller threshold") {
    const std::vector<double> x{1, 2, 3, 4}, y{0, 1, 1, 0};
    const auto s = best_numeric_split(all_rows(4), x, y);
    REQUIRE(s);
    CHECK(s->rule.threshold == 1.5);
  }

  TEST_CASE("categorical scan matches exhaustive search on 1000 instances") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 1000; ++rep) {
      const std::size_t k = 2 + rng() % 7, n = 200;
      std::vector<std::uint32_t> codes(n);
      std::vector<double> y(n), rate(k);
      for (auto& r : rate) r = std::uniform_real_distribution<double>(0, 1)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        codes[i] = static_cast<std::uint32_t>(rng() % k);
        y[i] = std::uniform_real_distribution<double>(0, 1)(rng) < rate[codes[i]];
      }
      const std::size_t bucket = 1 + rng() % 10;
      const auto rows = all_rows(n);
      const auto got = best_categorical_split(rows, codes, k, y, bucket);
      const auto want = oracle::exhaustive_categorical(rows, codes, k, y, bucket);
      REQUIRE(got.has_value() == want.has_value());
      if (!got) continue;
      CHECK(oracle::categorical_impurity(rows, codes, y, got->rule.left_levels) == want->impurity);
    }
  }

  TEST_CASE("numeric scan matches exhaustive search on 500 instances") {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 500; ++rep) {
      const std::size_t n = 5 + rng() % 60;
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(rng() % 15) * 0.1;
        y[i] = static_cast<double>(rng() % 2);
      }
      const std::size_t bucket = 1 + rng() % 4;
      const auto rows = all_rows(n);
      const auto got = best_numeric_split(rows, x, y, bucket);
      const auto want = oracle::exhaustive_numeric(rows, x, y, bucket);
      REQUIRE(got.has_value() == want.has_value());
      if (!got) continue;
      CHECK(got->rule.threshold == want->threshold);
    }
  }
}

TEST_SUITE("trees") {
  TEST_CASE("pure outcome gives a single leaf") {
    Dataset d({numeric_column("a", {1, 2, 3, 4, 5, 6, 7, 8}),
               coded_column("dx", {0, 1, 0, 1, 0, 1, 0, 1}, 2, ColumnRole::cluster_target),
               outcome_column({1, 1, 1, 1, 1, 1, 1, 1})});
    ForestParams p;
    p.min_split = 2;
    p.min_bucket = 1;
    Rng rng(1);
    const Tree t = fit_tree(d, p, rng);
    CHECK(t.is_trivial());
    CHECK(t.nodes[0].leaf_prediction == 1.0);
  }

  TEST_CASE("one separating predictor gives a depth-1 tree") {
    std::vector<std::uint32_t> dx(40);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      dx[i] = i % 2;
      y[i] = i % 2;
    }
    Dataset d({coded_column("dx", dx, 2, ColumnRole::cluster_target), outcome_column(y)});
    Rng rng(9);
    const Tree t = fit_tree(d, ForestParams{}, rng);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].split->left_levels == std::vector<std::uint32_t>{0});
    CHECK(t.nodes[1].is_leaf());
    CHECK(t.nodes[1].leaf_prediction == 0.0);
    CHECK(t.nodes[2].leaf_prediction == 1.0);
  }

  TEST_CASE("structural invariants over 100 random trees") {
    std::mt19937_64 gen(23);
    for (int rep = 0; rep < 100; ++rep) {
      const Dataset d = planted(300 + gen() % 300, gen());
      ForestParams p;
      p.min_split = 2 + gen() % 30;
      p.min_bucket = 1 + gen() % 10;
      p.max_depth = 1 + gen() % 8;
      p.complexity = (gen() % 3) * 0.005;
      std::vector<std::size_t> rows(d.n_rows());
      for (auto& r : rows) r = gen() % d.n_rows();
      Rng rng(gen());
      const Tree t = fit_tree(d, rows, p, rng);
      check_tree_invariants(t, d, rows, p);
    }
  }

  TEST_CASE("every target split is Gini-optimal among level bipartitions") {
    const Dataset d = planted(2000, 5);
    ForestParams p;
    p.n_trees = 20;
    p.min_bucket = 1;
    p.complexity = 0.0;
    p.max_depth = 6;
    p.seed = 3;
    const Forest f = fit_forest(d, p);
    const Column& dx = d.cluster_target();
    std::size_t checked = 0;
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
      // Recreate the bootstrap rows so node memberships can be rebuilt.
      Rng rng = make_rng(p.seed, {stream::tree, t});
      std::vector<std::size_t> rows(d.n_rows());
      std::uniform_int_distribution<std::size_t> pick(0, d.n_rows() - 1);
      for (auto& r : rows) r = pick(rng);
      const Tree& tree = f.trees[t];
      std::vector<std::vector<std::size_t>> members(tree.nodes.size());
      members[tree.root] = rows;
      for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        const auto& rule = *node.split;
        const Column& c = d.column(rule.feature);
        for (auto r : members[node.id]) {
          const bool left = rule.kind == SplitKind::level_set ? rule.sends_level_left(c.codes[r])
                                                              : c.values[r] < rule.threshold;
          members[left ? node.children->first : node.children->second].push_back(r);
        }
        if (rule.feature != d.target_index()) continue;
        const auto want = oracle::exhaustive_categorical(members[node.id], dx.codes, dx.n_levels(),
                                                         d.outcome().values, p.min_bucket);
        REQUIRE(want);
        CHECK(oracle::categorical_impurity(members[node.id], dx.codes, d.outcome().values,
                                           rule.left_levels) == want->impurity);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
}

TEST_SUITE("forests") {
  TEST_CASE("identical across runs and worker counts") {
    const Dataset d = planted(800, 2);
    ForestParams p;
    p.n_trees = 16;
    p.seed = 99;
    p.complexity = 0.002;
    const Forest a = fit_forest(d, p, 1);
    CHECK(a == fit_forest(d, p, 1));
    CHECK(a == fit_forest(d, p, 4));
    CHECK(a.trees.size() == 16);
    p.seed = 100;
    CHECK_FALSE(a == fit_forest(d, p, 1));
  }

  TEST_CASE("trivial roots appear with 24 predictors") {
    std::mt19937_64 gen(8);
    std::vector<Column> cols;
    const std::size_t n = 400;
    std::vector<double> y(n);
    for (auto& v : y) v = static_cast<double>(gen() % 2);
    for (int c = 0; c < 23; ++c) {
      std::vector<double> x(n);
      for (auto& v : x) v = static_cast<double>(gen() % 100);
      cols.push_back(numeric_column("x" + std::to_string(c), x));
    }
    std::vector<std::uint32_t> dx(n);
    for (auto& v : dx) v = static_cast<std::uint32_t>(gen() % 5);
    cols.push_back(coded_column("dx", dx, 5, ColumnRole::cluster_target));
    cols.push_back(outcome_column(y));
    const Dataset d(std::move(cols));
    ForestParams p;
    p.n_trees = 100;
    p.complexity = 0.0;
    std::size_t with_trivial = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      p.seed = s;
      const Forest f = fit_forest(d, p);
      with_trivial += f.trivial_root_count > 0;
      std::size_t counted = 0;
      for (const auto& t : f.trees) counted += t.is_trivial();
      CHECK(counted == f.trivial_root_count);
    }
    CHECK(with_trivial >= 5);
  }

  TEST_CASE("forest vote is at least as accurate as its average tree") {
    const Dataset d = planted(3000, 12);
    ForestParams p;
    p.n_trees = 50;
    p.seed = 4;
    p.complexity = 0.001;
    const Forest f = fit_forest(d, p);
    const auto& y = d.outcome().values;
    auto accuracy = [&](const std::vector<double>& prob) {
      double hit = 0;
      for (std::size_t i = 0; i < y.size(); ++i) hit += (prob[i] >= 0.5) == (y[i] > 0.5);
      return hit / static_cast<double>(y.size());
    };
    const double forest_acc = accuracy(predict_forest(f, d));
    double tree_acc = 0;
    for (const auto& t : f.trees) {
      Forest single = f;
      single.trees = {t};
      tree_acc += accuracy(predict_forest(single, d));
    }
    tree_acc /= static_cast<double>(f.trees.size());
    CHECK(forest_acc >= tree_acc);
  }

  TEST_CASE("params validation and json") {
    ForestParams p;
    p.n_trees = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.min_bucket = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.complexity = -1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.n_trees = 7;
    p.bootstrap = false;
    CHECK(forest_params_from_json(forest_params_to_json(p)) == p);
    CHECK(forest_params_from_json(nlohmann::json::object()) == ForestParams{});
  }
}

TEST_SUITE("prediction and serialization") {
  TEST_CASE("single-leaf forest predicts the leaf fraction") {
    Dataset d({coded_column("dx", {0, 1, 0, 1}, 2, ColumnRole::cluster_target),
               outcome_column({1, 0, 0, 0})});
    ForestParams p;
    p.n_trees = 3;
    p.bootstrap = false;
    const Forest f = fit_forest(d, p);  // 4 rows < min_split
    for (double v : predict_forest(f, d)) CHECK(v == 0.25);
  }

  TEST_CASE("identical trees predict like one tree") {
    const Dataset d = planted(500, 3);
    ForestParams p;
    p.n_trees = 1;
    p.complexity = 0.002;
    Forest f = fit_forest(d, p);
    const auto one = predict_forest(f, d);
    f.trees = {f.trees[0], f.trees[0], f.trees[0]};
    const auto three = predict_forest(f, d);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(three[i] == doctest::Approx(one[i]).epsilon(1e-15));
  }

  TEST_CASE("probabilities lie in [0,1] and unseen levels go right") {
    const Dataset d = planted(600, 6);
    ForestParams p;
    p.n_trees = 10;
    p.complexity = 0.0;
    const Forest f = fit_forest(d, p);
    for (double v : predict_forest(f, d)) CHECK((v >= 0.0 && v <= 1.0));

    // Rename every dx level: all level-set nodes on dx now route right.
    Column dx = d.cluster_target();
    for (auto& l : dx.levels) l = "new_" + l;
    const Dataset renamed = d.with_column(dx);
    const auto pred = predict_forest(f, renamed);
    for (double v : pred) CHECK((v >= 0.0 && v <= 1.0));
  }

  TEST_CASE("schema mismatch is an error") {
    const Dataset d = planted(300, 7);
    ForestParams p;
    p.n_trees = 5;
    p.complexity = 0.0;
    const Forest f = fit_forest(d, p);
    Dataset missing({coded_column("dx", {0}, 6, ColumnRole::cluster_target), outcome_column({1})});
    CHECK_THROWS_AS(predict_forest(f, missing), SchemaError);
    Dataset wrong_kind({coded_column("a", {0}, 1), numeric_column("b", {0}),
                        coded_column("noise", {0}, 3), coded_column("dx", {0}, 6, ColumnRole::cluster_target),
                        outcome_column({1})});
    CHECK_THROWS_AS(predict_forest(f, wrong_kind), SchemaError);
  }

  TEST_CASE("json round trip preserves the forest") {
    const Dataset d = planted(700, 8);
    ForestParams p;
    p.n_trees = 8;
    p.complexity = 0.001;
    p.seed = 5;
    const Forest f = fit_forest(d, p);
    const auto doc = forest_to_json(f);
    CHECK(doc.at("trees").size() == 8);
    const Forest back = forest_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(back == f);
    CHECK(predict_forest(back, d) == predict_forest(f, d));
    CHECK_THROWS_AS(forest_from_json(nlohmann::json{{"format", "other"}}), DataError);
  }
}
