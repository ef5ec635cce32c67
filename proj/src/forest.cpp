#include "cofa/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cofa/errors.hpp"
#include "cofa/parallel.hpp"

namespace cofa {

void ForestParams::validate() const {
  if (n_trees < 1) throw ConfigError("forest needs at least one tree");
  if (min_bucket < 1) throw ConfigError("min_bucket must be at least 1");
  if (!(complexity >= 0.0)) throw ConfigError("complexity must be non-negative");
}

nlohmann::json forest_params_to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},     {"min_split", p.min_split},   {"min_bucket", p.min_bucket},
          {"max_depth", p.max_depth}, {"complexity", p.complexity}, {"bootstrap", p.bootstrap},
          {"seed", p.seed}};
}

ForestParams forest_params_from_json(const nlohmann::json& doc, ForestParams p) {
  try {
    p.n_trees = doc.value("n_trees", p.n_trees);
    p.min_split = doc.value("min_split", p.min_split);
    p.min_bucket = doc.value("min_bucket", p.min_bucket);
    p.max_depth = doc.value("max_depth", p.max_depth);
    p.complexity = doc.value("complexity", p.complexity);
    p.bootstrap = doc.value("bootstrap", p.bootstrap);
    p.seed = doc.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed forest parameters: ") + e.what());
  }
  p.validate();
  return p;
}

bool SplitRule::sends_level_left(std::uint32_t code) const {
  return std::binary_search(left_levels.begin(), left_levels.end(), code);
}

std::size_t Tree::n_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double gini(std::size_t n, std::size_t positives) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(positives) / static_cast<double>(n);
  return 2.0 * p * (1.0 - p);
}

std::vector<std::size_t> dice_roll_features(std::span<const std::size_t> available, Rng& rng) {
  const std::size_t k = available.size();
  std::vector<std::size_t> chosen;
  if (k == 0) return chosen;
  std::size_t root = 0;
  while ((root + 1) * (root + 1) <= k) ++root;
  std::uniform_int_distribution<std::size_t> die(1, k);
  for (auto f : available)
    if (die(rng) <= root) chosen.push_back(f);
  return chosen;
}

namespace {

using u128 = unsigned __int128;
using i128 = __int128;

// Minimising weighted child Gini is maximising pl^2/nl + pr^2/nr. Kept as an
// exact fraction so equal partitions compare equal.
struct SplitScore {
  u128 num = 0;
  u128 den = 1;

  static SplitScore of(std::size_t nl, std::size_t pl, std::size_t nr, std::size_t pr) {
    return {u128(pl) * pl * nr + u128(pr) * pr * nl, u128(nl) * nr};
  }
  bool operator>(const SplitScore& o) const { return num * o.den > o.num * den; }
};

double improvement_of(std::size_t nl, std::size_t pl, std::size_t nr, std::size_t pr) {
  const std::size_t n = nl + nr;
  const std::size_t p = pl + pr;
  const i128 num = i128(n) * (i128(pl) * pl * nr + i128(pr) * pr * nl) - i128(p) * p * nl * nr;
  if (num <= 0) return 0.0;
  const double den = static_cast<double>(n) * static_cast<double>(nl) * static_cast<double>(nr) *
                     static_cast<double>(n);
  return 2.0 * static_cast<double>(num) / den;
}

}  // namespace

std::optional<SplitCandidate> best_categorical_split(std::span<const std::size_t> rows,
                                                     std::span<const std::uint32_t> codes,
                                                     std::size_t n_levels,
                                                     std::span<const double> outcome,
                                                     std::size_t min_bucket) {
  std::vector<std::size_t> count(n_levels, 0), pos(n_levels, 0);
  for (auto r : rows) {
    ++count[codes[r]];
    if (outcome[r] > 0.5) ++pos[codes[r]];
  }
  std::vector<std::uint32_t> present;
  for (std::uint32_t l = 0; l < n_levels; ++l)
    if (count[l] > 0) present.push_back(l);
  if (present.size() < 2) return std::nullopt;

  std::sort(present.begin(), present.end(), [&](std::uint32_t a, std::uint32_t b) {
    const u128 lhs = u128(pos[a]) * count[b];
    const u128 rhs = u128(pos[b]) * count[a];
    return lhs != rhs ? lhs < rhs : a < b;
  });

  const std::size_t n = rows.size();
  std::size_t total_pos = 0;
  for (auto l : present) total_pos += pos[l];

  std::optional<SplitScore> best;
  std::size_t best_cut = 0;
  std::uint32_t best_min = 0;
  std::size_t best_nl = 0, best_pl = 0;
  std::size_t nl = 0, pl = 0;
  std::uint32_t prefix_min = std::numeric_limits<std::uint32_t>::max();
  for (std::size_t cut = 1; cut < present.size(); ++cut) {
    const auto l = present[cut - 1];
    nl += count[l];
    pl += pos[l];
    prefix_min = std::min(prefix_min, l);
    const std::size_t nr = n - nl;
    if (nl < min_bucket || nr < min_bucket) continue;
    const auto score = SplitScore::of(nl, pl, nr, total_pos - pl);
    const bool take = !best || score > *best || (!(*best > score) && prefix_min < best_min);
    if (take) {
      best = score;
      best_cut = cut;
      best_min = prefix_min;
      best_nl = nl;
      best_pl = pl;
    }
  }
  if (!best) return std::nullopt;

  SplitCandidate out;
  out.rule.kind = SplitKind::level_set;
  out.rule.left_levels.assign(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(best_cut));
  std::sort(out.rule.left_levels.begin(), out.rule.left_levels.end());
  out.n_left = best_nl;
  out.n_right = n - best_nl;
  out.improvement = improvement_of(best_nl, best_pl, n - best_nl, total_pos - best_pl);
  return out;
}

std::optional<SplitCandidate> best_numeric_split(std::span<const std::size_t> rows,
                                                 std::span<const double> values,
                                                 std::span<const double> outcome,
                                                 std::size_t min_bucket) {
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(rows.size());
  std::size_t total_pos = 0;
  for (auto r : rows) {
    const bool y = outcome[r] > 0.5;
    total_pos += y;
    sorted.emplace_back(values[r], y);
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n < 2 || sorted.front().first == sorted.back().first) return std::nullopt;

  std::optional<SplitScore> best;
  std::size_t best_i = 0, best_pl = 0;
  std::size_t pl = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    pl += sorted[i].second;
    if (sorted[i].first == sorted[i + 1].first) continue;
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    if (nl < min_bucket || nr < min_bucket) continue;
    const auto score = SplitScore::of(nl, pl, nr, total_pos - pl);
    if (!best || score > *best) {
      best = score;
      best_i = i;
      best_pl = pl;
    }
  }
  if (!best) return std::nullopt;

  const double a = sorted[best_i].first;
  const double b = sorted[best_i + 1].first;
  double mid = a + (b - a) / 2.0;
  if (!(mid > a)) mid = b;

  SplitCandidate out;
  out.rule.kind = SplitKind::numeric_threshold;
  out.rule.threshold = mid;
  out.n_left = best_i + 1;
  out.n_right = n - out.n_left;
  out.improvement = improvement_of(out.n_left, best_pl, out.n_right, total_pos - best_pl);
  return out;
}

namespace {

// Numeric columns recoded as ranks into their sorted distinct values.
struct RankedColumn {
  std::vector<double> distinct;
  std::vector<std::uint32_t> rank;
};

std::vector<RankedColumn> rank_columns(const Dataset& d) {
  std::vector<RankedColumn> out(d.columns().size());
  for (auto f : d.tree_feature_indices()) {
    const Column& c = d.column(f);
    if (c.is_categorical()) continue;
    auto& rc = out[f];
    rc.distinct = c.values;
    std::sort(rc.distinct.begin(), rc.distinct.end());
    rc.distinct.erase(std::unique(rc.distinct.begin(), rc.distinct.end()), rc.distinct.end());
    rc.rank.resize(c.values.size());
    for (std::size_t r = 0; r < c.values.size(); ++r)
      rc.rank[r] = static_cast<std::uint32_t>(
          std::lower_bound(rc.distinct.begin(), rc.distinct.end(), c.values[r]) - rc.distinct.begin());
  }
  return out;
}

// Each node owns the same [begin, end) segment of rows_ and of every
// per-feature sorted order; splits partition all of them stably, so numeric
// candidates never re-sort.
class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, const ForestParams& params, Rng& rng,
              const std::vector<RankedColumn>& ranked)
      : d_(d),
        params_(params),
        rng_(rng),
        ranked_(ranked),
        features_(d.tree_feature_indices()),
        y_(d.outcome().values),
        target_(d.cluster_target()),
        sorted_(d.columns().size()),
        goes_left_(d.n_rows(), 0) {}

  Tree build(std::span<const std::size_t> rows) {
    rows_.assign(rows.begin(), rows.end());
    for (auto f : features_)
      if (!d_.column(f).is_categorical()) sorted_[f] = counting_sort(ranked_[f]);
    Tree tree;
    std::size_t pos = 0;
    for (auto r : rows_) pos += y_[r] > 0.5;
    root_risk_ = static_cast<double>(rows_.size()) * gini(rows_.size(), pos);

    struct Pending {
      std::size_t id, begin, end, depth;
    };
    std::vector<Pending> stack{{0, 0, rows_.size(), 0}};
    tree.nodes.emplace_back();
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      auto span = std::span<const std::size_t>(rows_).subspan(job.begin, job.end - job.begin);
      TreeNode node = describe(span, job.id, job.depth);

      if (auto cand = choose_split(job.begin, job.end, node)) {
        const SplitRule& rule = cand->rule;
        for (auto r : span) goes_left_[r] = sends_left(rule, r);
        const std::size_t split_at = partition(rows_, job.begin, job.end);
        for (auto f : features_)
          if (!sorted_[f].empty()) partition(sorted_[f], job.begin, job.end);
        const std::size_t left = tree.nodes.size();
        const std::size_t right = left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        node.split = rule;
        node.children = std::make_pair(left, right);
        stack.push_back({right, split_at, job.end, job.depth + 1});
        stack.push_back({left, job.begin, split_at, job.depth + 1});
      }
      tree.nodes[job.id] = std::move(node);
    }
    return tree;
  }

 private:
  std::vector<std::size_t> counting_sort(const RankedColumn& rc) const {
    std::vector<std::size_t> start(rc.distinct.size() + 1, 0);
    for (auto r : rows_) ++start[rc.rank[r] + 1];
    std::partial_sum(start.begin(), start.end(), start.begin());
    std::vector<std::size_t> out(rows_.size());
    for (auto r : rows_) out[start[rc.rank[r]]++] = r;
    return out;
  }

  // Stable partition of v[begin, end) by goes_left_; returns the boundary.
  std::size_t partition(std::vector<std::size_t>& v, std::size_t begin, std::size_t end) {
    scratch_.clear();
    std::size_t out = begin;
    for (std::size_t i = begin; i < end; ++i) {
      if (goes_left_[v[i]])
        v[out++] = v[i];
      else
        scratch_.push_back(v[i]);
    }
    std::copy(scratch_.begin(), scratch_.end(), v.begin() + static_cast<std::ptrdiff_t>(out));
    return out;
  }

  bool sends_left(const SplitRule& rule, std::size_t r) const {
    const Column& c = d_.column(rule.feature);
    if (rule.kind == SplitKind::level_set) return rule.sends_level_left(c.codes[r]);
    return c.values[r] < rule.threshold;
  }

  TreeNode describe(std::span<const std::size_t> rows, std::size_t id, std::size_t depth) const {
    TreeNode node;
    node.id = id;
    node.depth = depth;
    node.n_node = rows.size();
    std::vector<char> seen(target_.n_levels(), 0);
    for (auto r : rows) {
      node.n_positive += y_[r] > 0.5;
      seen[target_.codes[r]] = 1;
    }
    for (std::uint32_t l = 0; l < seen.size(); ++l)
      if (seen[l]) node.levels_present.push_back(l);
    node.leaf_prediction =
        node.n_node ? static_cast<double>(node.n_positive) / static_cast<double>(node.n_node) : 0.0;
    return node;
  }

  // best_numeric_split over a presorted segment.
  std::optional<SplitCandidate> numeric_split(std::size_t f, std::size_t begin, std::size_t end,
                                              std::size_t total_pos) const {
    const auto& order = sorted_[f];
    const auto& rank = ranked_[f].rank;
    const std::size_t n = end - begin;
    if (n < 2 || rank[order[begin]] == rank[order[end - 1]]) return std::nullopt;

    std::optional<SplitScore> best;
    double best_approx = -1.0;
    std::size_t best_i = 0, best_pl = 0;
    std::size_t pl = 0;
    const std::size_t lo = std::max<std::size_t>(params_.min_bucket, 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t r = order[begin + i];
      pl += y_[r] > 0.5;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < lo || nr < lo || rank[r] == rank[order[begin + i + 1]]) continue;
      // Exact comparison only when the floating estimate cannot decide.
      const double fpl = static_cast<double>(pl), fpr = static_cast<double>(total_pos - pl);
      const double approx = fpl * fpl / static_cast<double>(nl) + fpr * fpr / static_cast<double>(nr);
      if (best && approx < best_approx * (1.0 - 1e-12)) continue;
      const auto score = SplitScore::of(nl, pl, nr, total_pos - pl);
      if (!best || score > *best) {
        best = score;
        best_approx = approx;
        best_i = i;
        best_pl = pl;
      }
    }
    if (!best) return std::nullopt;

    const double a = ranked_[f].distinct[rank[order[begin + best_i]]];
    const double b = ranked_[f].distinct[rank[order[begin + best_i + 1]]];
    double mid = a + (b - a) / 2.0;
    if (!(mid > a)) mid = b;

    SplitCandidate out;
    out.rule.kind = SplitKind::numeric_threshold;
    out.rule.threshold = mid;
    out.n_left = best_i + 1;
    out.n_right = n - out.n_left;
    out.improvement = improvement_of(out.n_left, best_pl, out.n_right, total_pos - best_pl);
    return out;
  }

  std::optional<SplitCandidate> choose_split(std::size_t begin, std::size_t end, const TreeNode& node) {
    if (node.n_node < params_.min_split || node.depth >= params_.max_depth) return std::nullopt;
    if (node.n_positive == 0 || node.n_positive == node.n_node) return std::nullopt;

    const auto rows = std::span<const std::size_t>(rows_).subspan(begin, end - begin);
    std::optional<SplitCandidate> best;
    for (auto f : dice_roll_features(features_, rng_)) {
      const Column& c = d_.column(f);
      std::optional<SplitCandidate> cand =
          c.is_categorical()
              ? best_categorical_split(rows, c.codes, c.n_levels(), y_, params_.min_bucket)
              : numeric_split(f, begin, end, node.n_positive);
      if (!cand) continue;
      cand->rule.feature = f;
      if (!best || cand->improvement > best->improvement) best = std::move(cand);
    }
    if (!best || !(best->improvement > 0.0)) return std::nullopt;
    const double gain = static_cast<double>(node.n_node) * best->improvement;
    if (gain < params_.complexity * root_risk_) return std::nullopt;
    return best;
  }

  const Dataset& d_;
  const ForestParams& params_;
  Rng& rng_;
  const std::vector<RankedColumn>& ranked_;
  std::vector<std::size_t> features_;
  std::span<const double> y_;
  const Column& target_;
  std::vector<std::size_t> rows_;
  std::vector<std::vector<std::size_t>> sorted_;
  std::vector<char> goes_left_;
  std::vector<std::size_t> scratch_;
  double root_risk_ = 0.0;
};

}  // namespace

Tree fit_tree(const Dataset& d, std::span<const std::size_t> rows, const ForestParams& params,
              Rng& rng) {
  params.validate();
  const auto ranked = rank_columns(d);
  return TreeBuilder(d, params, rng, ranked).build(rows);
}

Tree fit_tree(const Dataset& d, const ForestParams& params, Rng& rng) {
  std::vector<std::size_t> rows(d.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree(d, rows, params, rng);
}

Forest fit_forest(const Dataset& d, const ForestParams& params, std::size_t workers) {
  params.validate();
  if (d.n_rows() == 0) throw DataError("cannot fit a forest on an empty dataset");
  Forest f;
  f.params = params;
  f.schema = d.schema();
  for (const auto& c : d.columns()) f.levels.push_back(c.levels);
  f.target = d.target_index();
  f.trees.resize(params.n_trees);
  const auto ranked = rank_columns(d);

  parallel_for(params.n_trees, workers, [&](std::size_t t) {
    Rng rng = make_rng(params.seed, {stream::tree, t});
    std::vector<std::size_t> rows(d.n_rows());
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, d.n_rows() - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    f.trees[t] = TreeBuilder(d, params, rng, ranked).build(rows);
  });
  f.trivial_root_count = static_cast<std::size_t>(
      std::count_if(f.trees.begin(), f.trees.end(), [](const Tree& t) { return t.is_trivial(); }));
  return f;
}

std::vector<double> predict_forest(const Forest& f, const Dataset& d) {
  constexpr auto unseen = std::numeric_limits<std::uint32_t>::max();
  // Training column -> column of d, plus level translation for categoricals.
  std::vector<std::optional<std::size_t>> column_of(f.schema.size());
  std::vector<std::vector<std::uint32_t>> level_map(f.schema.size());
  auto bind = [&](std::size_t j) {
    if (column_of[j]) return;
    const auto& s = f.schema[j];
    auto k = d.find_column(s.name);
    if (!k) throw SchemaError("prediction data lacks column '" + s.name + "'");
    const Column& c = d.column(*k);
    if ((c.schema.kind == ColumnKind::categorical) != (s.kind == ColumnKind::categorical))
      throw SchemaError("column '" + s.name + "' changed kind since training");
    if (c.is_categorical()) {
      auto& map = level_map[j];
      map.assign(c.n_levels(), unseen);
      for (std::uint32_t l = 0; l < c.n_levels(); ++l) {
        const auto& names = f.levels[j];
        auto it = std::find(names.begin(), names.end(), c.levels[l]);
        if (it != names.end()) map[l] = static_cast<std::uint32_t>(it - names.begin());
      }
    }
    column_of[j] = k;
  };
  for (const auto& t : f.trees)
    for (const auto& n : t.nodes)
      if (n.split) bind(n.split->feature);

  std::vector<double> out(d.n_rows(), 0.0);
  if (f.trees.empty()) return out;
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    double sum = 0.0;
    for (const auto& t : f.trees) {
      std::size_t id = t.root;
      while (!t.nodes[id].is_leaf()) {
        const TreeNode& node = t.nodes[id];
        const SplitRule& rule = *node.split;
        const Column& c = d.column(*column_of[rule.feature]);
        bool left = false;
        if (rule.kind == SplitKind::level_set) {
          const auto code = level_map[rule.feature][c.codes[r]];
          left = code != unseen && rule.sends_level_left(code);
        } else {
          left = c.values[r] < rule.threshold;
        }
        id = left ? node.children->first : node.children->second;
      }
      sum += t.nodes[id].leaf_prediction;
    }
    out[r] = std::clamp(sum / static_cast<double>(f.trees.size()), 0.0, 1.0);
  }
  return out;
}

// --- serialization ------------------------------------------------------

nlohmann::json forest_to_json(const Forest& f) {
  using nlohmann::json;
  json columns = json::array();
  for (std::size_t j = 0; j < f.schema.size(); ++j) {
    json c = {{"name", f.schema[j].name},
              {"kind", to_string(f.schema[j].kind)},
              {"role", to_string(f.schema[j].role)}};
    if (f.schema[j].kind == ColumnKind::categorical) c["levels"] = f.levels[j];
    columns.push_back(std::move(c));
  }
  const auto& target_levels = f.levels[f.target];
  json trees = json::array();
  for (const auto& t : f.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      json present = json::array();
      for (auto l : n.levels_present) present.push_back(target_levels[l]);
      json node = {{"id", n.id},
                   {"depth", n.depth},
                   {"n", n.n_node},
                   {"positives", n.n_positive},
                   {"prediction", n.leaf_prediction},
                   {"levels_present", present}};
      if (n.split) {
        const auto& rule = *n.split;
        json split = {{"feature", f.schema[rule.feature].name}};
        if (rule.kind == SplitKind::level_set) {
          split["kind"] = "level-set";
          json left = json::array();
          for (auto l : rule.left_levels) left.push_back(f.levels[rule.feature][l]);
          split["left_levels"] = left;
        } else {
          split["kind"] = "numeric-threshold";
          split["threshold"] = rule.threshold;
        }
        node["split"] = split;
        node["left"] = n.children->first;
        node["right"] = n.children->second;
      }
      nodes.push_back(std::move(node));
    }
    trees.push_back({{"root", t.root}, {"nodes", nodes}});
  }
  return {{"format", "cofa-forest/1"},
          {"params", forest_params_to_json(f.params)},
          {"columns", columns},
          {"target", f.schema[f.target].name},
          {"trivial_root_count", f.trivial_root_count},
          {"trees", trees}};
}

Forest forest_from_json(const nlohmann::json& doc) {
  Forest f;
  try {
    if (doc.at("format") != "cofa-forest/1") throw DataError("unsupported forest format");
    f.params = forest_params_from_json(doc.at("params"));
    for (const auto& c : doc.at("columns")) {
      f.schema.push_back({c.at("name").get<std::string>(),
                          parse_column_kind(c.at("kind").get<std::string>()),
                          parse_column_role(c.at("role").get<std::string>())});
      f.levels.push_back(c.value("levels", std::vector<std::string>{}));
    }
    auto index_of = [&](const std::string& name) {
      for (std::size_t j = 0; j < f.schema.size(); ++j)
        if (f.schema[j].name == name) return j;
      throw DataError("forest refers to unknown column '" + name + "'");
    };
    auto level_code = [&](std::size_t j, const std::string& name) {
      const auto& lv = f.levels[j];
      auto it = std::find(lv.begin(), lv.end(), name);
      if (it == lv.end()) throw DataError("forest refers to unknown level '" + name + "'");
      return static_cast<std::uint32_t>(it - lv.begin());
    };
    f.target = index_of(doc.at("target").get<std::string>());
    f.trivial_root_count = doc.at("trivial_root_count").get<std::size_t>();
    for (const auto& jt : doc.at("trees")) {
      Tree t;
      t.root = jt.at("root").get<std::size_t>();
      for (const auto& jn : jt.at("nodes")) {
        TreeNode n;
        n.id = jn.at("id").get<std::size_t>();
        n.depth = jn.at("depth").get<std::size_t>();
        n.n_node = jn.at("n").get<std::size_t>();
        n.n_positive = jn.at("positives").get<std::size_t>();
        n.leaf_prediction = jn.at("prediction").get<double>();
        for (const auto& l : jn.at("levels_present"))
          n.levels_present.push_back(level_code(f.target, l.get<std::string>()));
        std::sort(n.levels_present.begin(), n.levels_present.end());
        if (jn.contains("split")) {
          const auto& js = jn.at("split");
          SplitRule rule;
          rule.feature = index_of(js.at("feature").get<std::string>());
          if (js.at("kind") == "level-set") {
            rule.kind = SplitKind::level_set;
            for (const auto& l : js.at("left_levels"))
              rule.left_levels.push_back(level_code(rule.feature, l.get<std::string>()));
            std::sort(rule.left_levels.begin(), rule.left_levels.end());
          } else {
            rule.kind = SplitKind::numeric_threshold;
            rule.threshold = js.at("threshold").get<double>();
          }
          n.split = std::move(rule);
          n.children = std::make_pair(jn.at("left").get<std::size_t>(), jn.at("right").get<std::size_t>());
        }
        t.nodes.push_back(std::move(n));
      }
      f.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed forest document: ") + e.what());
  }
  return f;
}

}  // namespace cofa
