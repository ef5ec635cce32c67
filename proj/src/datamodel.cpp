#include "cofa/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cofa/errors.hpp"
#include "cofa/random.hpp"
#include "cofa/text.hpp"

namespace cofa {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::binary_outcome: return "binary-outcome";
  }
  return "?";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::predictor: return "predictor";
    case ColumnRole::outcome: return "outcome";
    case ColumnRole::cluster_target: return "cluster-target";
    case ColumnRole::ignore: return "ignore";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::numeric;
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "binary-outcome" || text == "binary_outcome") return ColumnKind::binary_outcome;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
  if (text == "predictor") return ColumnRole::predictor;
  if (text == "outcome") return ColumnRole::outcome;
  if (text == "cluster-target" || text == "cluster_target") return ColumnRole::cluster_target;
  if (text == "ignore") return ColumnRole::ignore;
  throw SchemaError("unknown column role '" + std::string(text) + "'");
}

void validate_schema(const Schema& schema) {
  std::set<std::string> names;
  int outcomes = 0;
  int targets = 0;
  for (const auto& c : schema) {
    if (c.name.empty()) throw SchemaError("empty column name");
    if (!names.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
    if ((c.kind == ColumnKind::binary_outcome) != (c.role == ColumnRole::outcome))
      throw SchemaError("column '" + c.name + "': only the outcome may be binary-outcome");
    if (c.role == ColumnRole::outcome) ++outcomes;
    if (c.role == ColumnRole::cluster_target) {
      if (c.kind != ColumnKind::categorical)
        throw SchemaError("cluster target '" + c.name + "' must be categorical");
      ++targets;
    }
  }
  if (outcomes != 1) throw SchemaError("schema needs exactly one outcome column");
  if (targets != 1) throw SchemaError("schema needs exactly one cluster-target column");
}

Schema schema_from_json(const nlohmann::json& doc) {
  Schema schema;
  try {
    for (const auto& c : doc.at("columns")) {
      ColumnSchema col;
      col.name = c.at("name").get<std::string>();
      col.kind = parse_column_kind(c.at("kind").get<std::string>());
      col.role = parse_column_role(c.value("role", std::string("predictor")));
      schema.push_back(std::move(col));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  validate_schema(schema);
  return schema;
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema)
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"role", to_string(c.role)}});
  return {{"columns", cols}};
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return schema_from_json(doc);
}

std::vector<std::size_t> Column::level_counts() const {
  std::vector<std::size_t> counts(levels.size(), 0);
  for (auto c : codes) ++counts[c];
  return counts;
}

std::optional<std::uint32_t> Column::find_level(std::string_view name) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == name) return static_cast<std::uint32_t>(i);
  return std::nullopt;
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  Schema s = schema();
  validate_schema(s);
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const Column& c = columns_[j];
    if (c.size() != n_rows_)
      throw DataError("column '" + c.schema.name + "' has " + std::to_string(c.size()) +
                      " rows, expected " + std::to_string(n_rows_));
    if (c.is_categorical()) {
      if (!c.values.empty()) throw DataError("categorical column '" + c.schema.name + "' has values");
      for (auto code : c.codes)
        if (code >= c.levels.size())
          throw DataError("column '" + c.schema.name + "': level code out of range");
    } else {
      if (!c.codes.empty() || !c.levels.empty())
        throw DataError("numeric column '" + c.schema.name + "' has level codes");
      for (double v : c.values) {
        if (!std::isfinite(v)) throw DataError("column '" + c.schema.name + "': non-finite value");
        if (c.schema.kind == ColumnKind::binary_outcome && v != 0.0 && v != 1.0)
          throw DataError("outcome column '" + c.schema.name + "' must be 0/1");
      }
    }
    if (c.schema.role == ColumnRole::outcome) outcome_ = j;
    if (c.schema.role == ColumnRole::cluster_target) target_ = j;
  }
}

const Column& Dataset::column(std::string_view name) const { return columns_[column_index(name)]; }

std::optional<std::size_t> Dataset::find_column(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].schema.name == name) return j;
  return std::nullopt;
}

std::size_t Dataset::column_index(std::string_view name) const {
  if (auto j = find_column(name)) return *j;
  throw SchemaError("no column named '" + std::string(name) + "'");
}

Schema Dataset::schema() const {
  Schema s;
  s.reserve(columns_.size());
  for (const auto& c : columns_) s.push_back(c.schema);
  return s;
}

std::vector<std::size_t> Dataset::tree_feature_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    auto role = columns_[j].schema.role;
    if (role == ColumnRole::predictor || role == ColumnRole::cluster_target) out.push_back(j);
  }
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column out;
    out.schema = c.schema;
    out.levels = c.levels;
    if (c.is_categorical()) {
      out.codes.reserve(rows.size());
      for (auto r : rows) out.codes.push_back(c.codes.at(r));
    } else {
      out.values.reserve(rows.size());
      for (auto r : rows) out.values.push_back(c.values.at(r));
    }
    cols.push_back(std::move(out));
  }
  return Dataset(std::move(cols));
}

Dataset Dataset::with_column(Column column) const {
  std::vector<Column> cols = columns_;
  if (auto j = find_column(column.schema.name))
    cols[*j] = std::move(column);
  else
    cols.push_back(std::move(column));
  return Dataset(std::move(cols));
}

// --- CSV ----------------------------------------------------------------

namespace {

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

double parse_real(std::string_view cell, bool& ok) {
  while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
  while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  ok = ec == std::errc{} && end == cell.data() + cell.size() && std::isfinite(v);
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const Schema& schema) {
  validate_schema(schema);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    header = split_csv_record(line);
    break;
  }
  if (header.empty()) throw DataError("CSV input has no header row");

  std::vector<std::size_t> source(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    auto it = std::find(header.begin(), header.end(), schema[j].name);
    if (it == header.end()) throw SchemaError("CSV header lacks column '" + schema[j].name + "'");
    source[j] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Column> cols(schema.size());
  std::vector<std::unordered_map<std::string, std::uint32_t>> dict(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) cols[j].schema = schema[j];

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    ++row;
    std::vector<std::string> fields;
    try {
      fields = split_csv_record(line);
    } catch (const DataError& e) {
      throw IngestError(row, "*", e.what());
    }
    if (fields.size() != header.size())
      throw IngestError(row, "*",
                        "expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& cell = fields[source[j]];
      Column& c = cols[j];
      if (is_missing(cell)) throw IngestError(row, c.schema.name, "missing value");
      if (c.is_categorical()) {
        auto [it, inserted] = dict[j].try_emplace(cell, static_cast<std::uint32_t>(c.levels.size()));
        if (inserted) c.levels.push_back(cell);
        c.codes.push_back(it->second);
      } else {
        bool ok = false;
        double v = parse_real(cell, ok);
        if (!ok) throw IngestError(row, c.schema.name, "cannot parse '" + cell + "' as a number");
        if (c.schema.kind == ColumnKind::binary_outcome && v != 0.0 && v != 1.0)
          throw IngestError(row, c.schema.name, "outcome must be 0 or 1, found '" + cell + "'");
        c.values.push_back(v);
      }
    }
  }
  return Dataset(std::move(cols));
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_csv(in, schema);
  } catch (const IngestError& e) {
    throw IngestError(e.row(), e.column(), path.string() + ": " + e.what());
  }
}

void write_csv(const Dataset& d, std::ostream& out, std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  const auto& cols = d.columns();
  for (std::size_t j = 0; j < cols.size(); ++j)
    out << (j ? "," : "") << csv_field(cols[j].schema.name);
  out << '\n';
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out << ',';
      const Column& c = cols[j];
      if (c.is_categorical())
        out << csv_field(c.levels[c.codes[r]]);
      else
        out << format_number(c.values[r]);
    }
    out << '\n';
  }
}

// --- level manipulation -------------------------------------------------

Dataset bucket_rare_levels(const Dataset& d, std::string_view column, std::size_t min_count) {
  const std::size_t j = d.column_index(column);
  const Column& src = d.column(j);
  if (!src.is_categorical())
    throw SchemaError("column '" + std::string(column) + "' is not categorical");

  const auto counts = src.level_counts();
  const auto existing_other = src.find_level(kOtherLevel);
  bool any_remapped = false;
  for (std::size_t l = 0; l < counts.size(); ++l)
    if (counts[l] > 0 && counts[l] < min_count && l != existing_other) any_remapped = true;

  Column out;
  out.schema = src.schema;
  std::vector<std::uint32_t> remap(src.n_levels());
  std::optional<std::uint32_t> other;
  const bool keep_other = existing_other && (counts[*existing_other] > 0 || any_remapped);
  for (std::size_t l = 0; l < src.n_levels(); ++l) {
    const bool is_other = existing_other && l == *existing_other;
    if (is_other ? keep_other : counts[l] >= min_count) {
      remap[l] = static_cast<std::uint32_t>(out.levels.size());
      if (is_other) other = remap[l];
      out.levels.push_back(src.levels[l]);
    }
  }
  if (any_remapped && !other) {
    other = static_cast<std::uint32_t>(out.levels.size());
    out.levels.emplace_back(kOtherLevel);
  }
  for (std::size_t l = 0; l < src.n_levels(); ++l) {
    const bool is_other = existing_other && l == *existing_other;
    if (!is_other && counts[l] < min_count && counts[l] > 0) remap[l] = *other;
  }
  out.codes.reserve(src.codes.size());
  for (auto c : src.codes) out.codes.push_back(remap[c]);

  // Only "Other" itself may stay below the threshold.
  return d.with_column(std::move(out));
}

Dataset add_mapped_column(const Dataset& d, std::string_view source, std::string_view new_name,
                          std::span<const std::uint32_t> mapping,
                          std::vector<std::string> group_names, ColumnRole role) {
  const Column& src = d.column(source);
  if (!src.is_categorical())
    throw SchemaError("column '" + std::string(source) + "' is not categorical");
  if (mapping.size() != src.n_levels())
    throw ConfigError("level mapping for '" + std::string(source) + "' has " +
                      std::to_string(mapping.size()) + " entries, expected " +
                      std::to_string(src.n_levels()));
  for (auto g : mapping)
    if (g >= group_names.size()) throw ConfigError("level mapping refers to an unknown group");
  if (role == ColumnRole::outcome || role == ColumnRole::cluster_target)
    throw ConfigError("a mapped column cannot be the outcome or cluster target");
  Column out;
  out.schema = {std::string(new_name), ColumnKind::categorical, role};
  out.levels = std::move(group_names);
  out.codes.reserve(src.codes.size());
  for (auto c : src.codes) out.codes.push_back(mapping[c]);
  return d.with_column(std::move(out));
}

// --- encoding -----------------------------------------------------------

namespace {

std::uint32_t reference_level(const Column& c, ReferencePolicy policy) {
  if (policy == ReferencePolicy::first_level || c.n_levels() == 0) return 0;
  const auto counts = c.level_counts();
  // max_element returns the first maximum, i.e. ties go to dictionary order.
  return static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

EncodingPlan plan_encoding(const Dataset& d, const EncodeOptions& options) {
  EncodingPlan plan;
  auto expand = [&](const Column& c) {
    const auto ref = reference_level(c, options.reference);
    if (c.n_levels() > 0) plan.reference_levels[c.schema.name] = c.levels[ref];
    for (std::uint32_t l = 0; l < c.n_levels(); ++l) {
      if (l == ref) continue;
      plan.features.push_back({c.schema.name + "=" + c.levels[l], c.schema.name, c.levels[l]});
    }
  };

  for (const auto& name : options.extra_indicators) {
    const Column& c = d.column(name);
    if (!c.is_categorical()) throw SchemaError("column '" + name + "' is not categorical");
    if (c.schema.role == ColumnRole::outcome) throw SchemaError("cannot encode the outcome");
  }

  for (const auto& c : d.columns()) {
    const bool extra = std::find(options.extra_indicators.begin(), options.extra_indicators.end(),
                                 c.schema.name) != options.extra_indicators.end();
    switch (c.schema.role) {
      case ColumnRole::outcome: break;
      case ColumnRole::predictor:
        if (c.is_categorical())
          expand(c);
        else
          plan.features.push_back({c.schema.name, c.schema.name, std::nullopt});
        break;
      case ColumnRole::cluster_target:
        if (options.target == TargetEncoding::indicators || extra) expand(c);
        break;
      case ColumnRole::ignore:
        if (extra) expand(c);
        break;
    }
  }
  if (options.target == TargetEncoding::group_labels) {
    const std::string name =
        options.group_column.empty() ? d.cluster_target().schema.name : options.group_column;
    if (!d.column(name).is_categorical())
      throw SchemaError("group column '" + name + "' is not categorical");
    plan.group_column = name;
  }
  return plan;
}

DesignMatrix apply_encoding(const EncodingPlan& plan, const Dataset& d) {
  DesignMatrix x;
  const std::size_t n = d.n_rows();
  x.outcome = d.outcome().values;
  x.names.reserve(plan.features.size());
  x.columns.reserve(plan.features.size());
  for (const auto& f : plan.features) {
    const Column& c = d.column(f.column);
    std::vector<double> col(n, 0.0);
    if (f.level) {
      if (!c.is_categorical()) throw SchemaError("column '" + f.column + "' is not categorical");
      if (auto code = c.find_level(*f.level)) {
        for (std::size_t r = 0; r < n; ++r) col[r] = c.codes[r] == *code ? 1.0 : 0.0;
      }
    } else {
      if (c.is_categorical()) throw SchemaError("column '" + f.column + "' is not numeric");
      col = c.values;
    }
    x.names.push_back(f.name);
    x.columns.push_back(std::move(col));
  }
  if (plan.group_column) {
    const Column& g = d.column(*plan.group_column);
    if (!g.is_categorical()) throw SchemaError("group column is not categorical");
    x.group_labels = g.codes;
    x.group_names = g.levels;
  }
  return x;
}

DesignMatrix encode(const Dataset& d, const EncodeOptions& options) {
  return apply_encoding(plan_encoding(d, options), d);
}

DesignMatrix DesignMatrix::select_rows(std::span<const std::size_t> rows) const {
  DesignMatrix out;
  out.names = names;
  out.group_names = group_names;
  out.columns.reserve(columns.size());
  for (const auto& col : columns) {
    std::vector<double> c;
    c.reserve(rows.size());
    for (auto r : rows) c.push_back(col.at(r));
    out.columns.push_back(std::move(c));
  }
  out.outcome.reserve(rows.size());
  for (auto r : rows) out.outcome.push_back(outcome.at(r));
  if (group_labels) {
    std::vector<std::uint32_t> g;
    g.reserve(rows.size());
    for (auto r : rows) g.push_back(group_labels->at(r));
    out.group_labels = std::move(g);
  }
  return out;
}

DesignMatrix DesignMatrix::select_features(std::span<const std::size_t> features) const {
  DesignMatrix out;
  out.outcome = outcome;
  out.group_labels = group_labels;
  out.group_names = group_names;
  for (auto f : features) {
    out.names.push_back(names.at(f));
    out.columns.push_back(columns.at(f));
  }
  return out;
}

// --- splitting ----------------------------------------------------------

RowSplit split_rows(std::size_t n_rows, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_rows)));
  if (n_train == 0 || n_train >= n_rows)
    throw ConfigError("split of " + std::to_string(n_rows) + " rows leaves one side empty");
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {stream::split});
  std::shuffle(order.begin(), order.end(), rng);
  RowSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double train_fraction,
                                             std::uint64_t seed) {
  const RowSplit s = split_rows(d.n_rows(), train_fraction, seed);
  return {d.select_rows(s.train), d.select_rows(s.test)};
}

// --- synthetic ----------------------------------------------------------

void SyntheticSpec::validate() const {
  if (n_rows == 0) throw ConfigError("synthetic spec: n_rows must be positive");
  if (level_weights.empty()) throw ConfigError("synthetic spec: no levels");
  for (double w : level_weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigError("synthetic spec: level weights must be positive and finite");
  if (planted_groups.size() != level_weights.size())
    throw ConfigError("synthetic spec: every level needs exactly one planted group");
  if (group_event_rates.empty()) throw ConfigError("synthetic spec: no groups");
  for (auto g : planted_groups)
    if (g >= group_event_rates.size())
      throw ConfigError("synthetic spec: planted group index out of range");
  for (double r : group_event_rates)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("synthetic spec: event rates must lie in (0,1)");
  if (!level_names.empty()) {
    if (level_names.size() != level_weights.size())
      throw ConfigError("synthetic spec: level_names and level_weights differ in length");
    std::set<std::string> unique(level_names.begin(), level_names.end());
    if (unique.size() != level_names.size()) throw ConfigError("synthetic spec: duplicate level names");
  }
  std::set<std::string> names{target_name, outcome_name};
  if (names.size() != 2) throw ConfigError("synthetic spec: target and outcome share a name");
  for (const auto& c : covariates) {
    if (!names.insert(c.name).second)
      throw ConfigError("synthetic spec: duplicate column name '" + c.name + "'");
    if (c.coefficient.size() != 1 && c.coefficient.size() != group_event_rates.size())
      throw ConfigError("synthetic spec: covariate '" + c.name +
                        "' needs one coefficient or one per group");
    if (c.distribution == CovariateSpec::Distribution::bernoulli && !(c.mean >= 0.0 && c.mean <= 1.0))
      throw ConfigError("synthetic spec: bernoulli p out of range for '" + c.name + "'");
    if (c.distribution == CovariateSpec::Distribution::normal && !(c.sd >= 0.0))
      throw ConfigError("synthetic spec: negative sd for '" + c.name + "'");
  }
}

std::vector<std::string> SyntheticSpec::resolved_level_names() const {
  if (!level_names.empty()) return level_names;
  std::vector<std::string> out;
  const int width = level_weights.size() < 100 ? 2 : 3;
  for (std::size_t i = 0; i < level_weights.size(); ++i) {
    std::string num = std::to_string(i + 1);
    out.push_back("L" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num);
  }
  return out;
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc) {
  SyntheticSpec s;
  try {
    s.n_rows = doc.at("n_rows").get<std::size_t>();
    s.level_names = doc.value("level_names", std::vector<std::string>{});
    s.level_weights = doc.at("level_weights").get<std::vector<double>>();
    s.planted_groups = doc.at("planted_groups").get<std::vector<std::uint32_t>>();
    s.group_event_rates = doc.at("group_event_rates").get<std::vector<double>>();
    s.target_name = doc.value("target_name", s.target_name);
    s.outcome_name = doc.value("outcome_name", s.outcome_name);
    s.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& c : doc.value("covariates", nlohmann::json::array())) {
      CovariateSpec cov;
      cov.name = c.at("name").get<std::string>();
      const auto dist = c.value("distribution", std::string("normal"));
      if (dist == "normal") {
        cov.distribution = CovariateSpec::Distribution::normal;
        cov.mean = c.value("mean", 0.0);
        cov.sd = c.value("sd", 1.0);
      } else if (dist == "bernoulli") {
        cov.distribution = CovariateSpec::Distribution::bernoulli;
        cov.mean = c.value("p", 0.5);
      } else {
        throw ConfigError("synthetic spec: unknown distribution '" + dist + "'");
      }
      const auto& coef = c.value("coefficient", nlohmann::json(0.0));
      cov.coefficient = coef.is_array() ? coef.get<std::vector<double>>()
                                        : std::vector<double>{coef.get<double>()};
      s.covariates.push_back(std::move(cov));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& c : s.covariates) {
    nlohmann::json j = {{"name", c.name}};
    if (c.distribution == CovariateSpec::Distribution::normal) {
      j["distribution"] = "normal";
      j["mean"] = c.mean;
      j["sd"] = c.sd;
    } else {
      j["distribution"] = "bernoulli";
      j["p"] = c.mean;
    }
    j["coefficient"] = c.coefficient;
    covs.push_back(std::move(j));
  }
  return {{"n_rows", s.n_rows},
          {"level_names", s.resolved_level_names()},
          {"level_weights", s.level_weights},
          {"planted_groups", s.planted_groups},
          {"group_event_rates", s.group_event_rates},
          {"covariates", covs},
          {"target_name", s.target_name},
          {"outcome_name", s.outcome_name},
          {"seed", s.seed}};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, {stream::synthetic});
  std::discrete_distribution<std::uint32_t> level_dist(spec.level_weights.begin(),
                                                       spec.level_weights.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  std::vector<double> base_logit;
  for (double r : spec.group_event_rates) base_logit.push_back(std::log(r / (1.0 - r)));

  const std::size_t n_cov = spec.covariates.size();
  std::vector<Column> cols(n_cov + 2);
  for (std::size_t c = 0; c < n_cov; ++c) {
    cols[c].schema = {spec.covariates[c].name, ColumnKind::numeric, ColumnRole::predictor};
    cols[c].values.reserve(spec.n_rows);
  }
  Column& target = cols[n_cov];
  Column& outcome = cols[n_cov + 1];
  target.schema = {spec.target_name, ColumnKind::categorical, ColumnRole::cluster_target};
  target.levels = spec.resolved_level_names();
  target.codes.reserve(spec.n_rows);
  outcome.schema = {spec.outcome_name, ColumnKind::binary_outcome, ColumnRole::outcome};
  outcome.values.reserve(spec.n_rows);

  for (std::size_t r = 0; r < spec.n_rows; ++r) {
    const std::uint32_t level = level_dist(rng);
    const std::uint32_t group = spec.planted_groups[level];
    double eta = base_logit[group];
    for (std::size_t c = 0; c < n_cov; ++c) {
      const CovariateSpec& cov = spec.covariates[c];
      double x = 0.0;
      if (cov.distribution == CovariateSpec::Distribution::normal)
        x = cov.mean + cov.sd * std_normal(rng);
      else
        x = unif(rng) < cov.mean ? 1.0 : 0.0;
      const double beta = cov.coefficient.size() == 1 ? cov.coefficient[0] : cov.coefficient[group];
      eta += beta * (x - cov.mean);
      cols[c].values.push_back(x);
    }
    const double p = 1.0 / (1.0 + std::exp(-eta));
    target.codes.push_back(level);
    outcome.values.push_back(unif(rng) < p ? 1.0 : 0.0);
  }
  return Dataset(std::move(cols));
}

}  // namespace cofa
