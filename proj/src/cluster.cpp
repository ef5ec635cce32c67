#include "cofa/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "cofa/errors.hpp"
#include "cofa/text.hpp"

namespace cofa {

std::vector<std::size_t> Dendrogram::members(std::size_t cluster) const {
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{cluster};
  const std::size_t n = n_levels();
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    if (c < n) {
      out.push_back(c);
    } else {
      const Merge& m = merges.at(c - n);
      stack.push_back(m.a);
      stack.push_back(m.b);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> ClusterAssignment::zero_based() const {
  std::vector<std::uint32_t> out;
  out.reserve(group.size());
  for (auto g : group) out.push_back(g - 1);
  return out;
}

std::vector<std::string> ClusterAssignment::group_names() const {
  std::vector<std::string> out;
  for (std::size_t g = 1; g <= k; ++g) out.push_back("G" + std::to_string(g));
  return out;
}

Dendrogram complete_linkage(const SquareMatrix<double>& d, std::vector<std::string> level_names) {
  const std::size_t n = d.size();
  if (level_names.size() != n) throw ConfigError("distance matrix and level names differ in size");
  if (n < 2) throw ConfigError("clustering needs at least two levels");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (!std::isfinite(d(i, j)) || d(i, j) != d(j, i)))
        throw ConfigError("distance matrix must be finite and symmetric");

  // Active clusters live in the slot of their smallest level index, so the
  // slot pair order is the tie-break order.
  SquareMatrix<double> dist = d;
  std::vector<char> active(n, 1);
  std::vector<std::size_t> id(n);
  std::iota(id.begin(), id.end(), 0);

  Dendrogram dg;
  dg.level_names = std::move(level_names);
  dg.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bp = 0, bq = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n; ++p) {
      if (!active[p]) continue;
      for (std::size_t q = p + 1; q < n; ++q)
        if (active[q] && dist(p, q) < best) {
          best = dist(p, q);
          bp = p;
          bq = q;
        }
    }
    dg.merges.push_back({id[bp], id[bq], best});
    for (std::size_t x = 0; x < n; ++x)
      if (active[x] && x != bp && x != bq) dist.set_symmetric(bp, x, std::max(dist(bp, x), dist(bq, x)));
    active[bq] = 0;
    id[bp] = n + step;
  }
  return dg;
}

Dendrogram complete_linkage(const DistanceMatrix& d) { return complete_linkage(d.d, d.level_names); }

ClusterAssignment cut_tree(const Dendrogram& dg, std::size_t k) {
  const std::size_t n = dg.n_levels();
  if (k < 1 || k > n)
    throw ConfigError("cannot cut " + std::to_string(n) + " levels into " + std::to_string(k) + " groups");
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t m = 0; m + k < n; ++m) {
    const auto& merge = dg.merges[m];
    const auto a = find(dg.members(merge.a).front());
    const auto b = find(dg.members(merge.b).front());
    parent[std::max(a, b)] = std::min(a, b);
  }
  ClusterAssignment out;
  out.level_names = dg.level_names;
  out.group.resize(n);
  std::map<std::size_t, std::uint32_t> label;
  for (std::size_t l = 0; l < n; ++l) {
    auto [it, inserted] = label.try_emplace(find(l), static_cast<std::uint32_t>(label.size() + 1));
    out.group[l] = it->second;
  }
  out.k = label.size();
  return out;
}

// --- Newick -------------------------------------------------------------

namespace {

constexpr std::string_view kNewickDelimiters = "()[]':;, \t\r\n";

std::string newick_label(const std::string& name) {
  if (!name.empty() && name.find_first_of(kNewickDelimiters) == std::string::npos) return name;
  std::string out = "'";
  for (char c : name) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

class NewickParser {
 public:
  explicit NewickParser(std::string_view text) : text_(text) {}

  std::unique_ptr<NewickNode> parse() {
    skip_space();
    auto root = node();
    skip_space();
    expect(';');
    skip_space();
    if (pos_ != text_.size()) fail("trailing text");
    return root;
  }

 private:
  std::unique_ptr<NewickNode> node() {
    auto n = std::make_unique<NewickNode>();
    skip_space();
    if (peek() == '(') {
      ++pos_;
      do {
        n->children.push_back(node());
        skip_space();
      } while (accept(','));
      expect(')');
    }
    skip_space();
    n->name = label();
    skip_space();
    if (accept(':')) n->branch_length = number();
    return n;
  }

  std::string label() {
    std::string out;
    if (peek() == '\'') {
      ++pos_;
      for (;;) {
        if (pos_ >= text_.size()) fail("unterminated quoted label");
        const char c = text_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            out.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        out.push_back(c);
      }
      return out;
    }
    while (pos_ < text_.size() && kNewickDelimiters.find(text_[pos_]) == std::string_view::npos)
      out.push_back(text_[pos_++]);
    return out;
  }

  double number() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && kNewickDelimiters.find(text_[pos_]) == std::string_view::npos) ++pos_;
    const std::string tok(text_.substr(start, pos_ - start));
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) fail("bad branch length '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad branch length '" + tok + "'");
    }
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  // Whitespace and [bracketed] comments.
  void skip_space() {
    for (;;) {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (peek() != '[') return;
      const auto close = text_.find(']', pos_);
      if (close == std::string_view::npos) fail("unterminated comment");
      pos_ = close + 1;
    }
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("newick: " + what + " at offset " + std::to_string(pos_));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string export_newick(const Dendrogram& dg) {
  const std::size_t n = dg.n_levels();
  if (n == 0) return ";";
  if (dg.merges.empty()) return newick_label(dg.level_names[0]) + ";";
  auto height = [&](std::size_t c) { return c < n ? 0.0 : dg.merges[c - n].height; };
  std::function<std::string(std::size_t)> render = [&](std::size_t c) -> std::string {
    if (c < n) return newick_label(dg.level_names[c]);
    const auto& m = dg.merges[c - n];
    return "(" + render(m.a) + ":" + format_number(m.height - height(m.a)) + "," + render(m.b) + ":" +
           format_number(m.height - height(m.b)) + ")";
  };
  return render(n + dg.merges.size() - 1) + ";";
}

std::unique_ptr<NewickNode> parse_newick(std::string_view text) { return NewickParser(text).parse(); }

void write_merge_table_csv(std::ostream& out, const Dendrogram& dg,
                           std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  const std::size_t n = dg.n_levels();
  auto name = [&](std::size_t c) {
    return c < n ? csv_field(dg.level_names[c]) : "merge" + std::to_string(c - n + 1);
  };
  out << "merge,a,b,height\n";
  for (std::size_t m = 0; m < dg.merges.size(); ++m)
    out << "merge" << m + 1 << ',' << name(dg.merges[m].a) << ',' << name(dg.merges[m].b) << ','
        << format_number(dg.merges[m].height) << '\n';
}

void write_assignment_csv(std::ostream& out, const ClusterAssignment& a,
                          std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "level,group\n";
  for (std::size_t l = 0; l < a.level_names.size(); ++l)
    out << csv_field(a.level_names[l]) << ',' << a.group[l] << '\n';
}

ClusterAssignment read_assignment_csv(std::istream& in) {
  ClusterAssignment a;
  std::string line;
  bool header = true;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    auto rec = split_csv_record(line);
    if (header) {
      if (rec.size() != 2 || rec[0] != "level" || rec[1] != "group")
        throw DataError("assignment file must have header 'level,group'");
      header = false;
      continue;
    }
    ++row;
    if (rec.size() != 2) throw IngestError(row, "*", "expected two fields");
    std::uint32_t g = 0;
    try {
      g = static_cast<std::uint32_t>(std::stoul(rec[1]));
    } catch (const std::exception&) {
      throw IngestError(row, "group", "not a group number");
    }
    if (g == 0) throw IngestError(row, "group", "groups are numbered from 1");
    a.level_names.push_back(rec[0]);
    a.group.push_back(g);
    a.k = std::max<std::size_t>(a.k, g);
  }
  if (a.level_names.empty()) throw DataError("assignment file has no rows");
  return a;
}

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size()) throw ConfigError("labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> cell;
  std::map<std::uint32_t, double> row, col;
  for (std::size_t i = 0; i < n; ++i) {
    cell[{a[i], b[i]}] += 1;
    row[a[i]] += 1;
    col[b[i]] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, v] : cell) index += choose2(v);
  for (const auto& [k, v] : row) sum_a += choose2(v);
  for (const auto& [k, v] : col) sum_b += choose2(v);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (max_index - expected);
}

}  // namespace cofa
