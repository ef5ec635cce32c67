#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cofa {

enum class ColumnKind { numeric, categorical, binary_outcome };
enum class ColumnRole { predictor, outcome, cluster_target, ignore };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  ColumnRole role = ColumnRole::predictor;

  bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

/// Throws SchemaError unless names are unique, exactly one column is a
/// binary-outcome with role outcome, and exactly one is a categorical
/// cluster target.
void validate_schema(const Schema& schema);

/// Schema config document: {"columns": [{"name", "kind", "role"}, ...]}.
/// `role` defaults to predictor.
Schema schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const Schema& schema);
Schema load_schema(const std::filesystem::path& path);

/// One typed column. Numeric and outcome columns use `values`; categorical
/// columns use `codes` into the `levels` dictionary.
struct Column {
  ColumnSchema schema;
  std::vector<double> values;
  std::vector<std::uint32_t> codes;
  std::vector<std::string> levels;

  bool is_categorical() const noexcept { return schema.kind == ColumnKind::categorical; }
  std::size_t size() const noexcept { return is_categorical() ? codes.size() : values.size(); }
  std::size_t n_levels() const noexcept { return levels.size(); }

  /// Rows per level, indexed by code.
  std::vector<std::size_t> level_counts() const;
  std::optional<std::uint32_t> find_level(std::string_view name) const;

  bool operator==(const Column&) const = default;
};

/// Immutable table of typed columns sharing one row count.
class Dataset {
 public:
  Dataset() = default;
  /// Validates the schema and every cell invariant; throws SchemaError or
  /// DataError.
  explicit Dataset(std::vector<Column> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_columns() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t index) const { return columns_.at(index); }
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;
  Schema schema() const;

  std::size_t outcome_index() const noexcept { return outcome_; }
  std::size_t target_index() const noexcept { return target_; }
  const Column& outcome() const { return columns_[outcome_]; }
  const Column& cluster_target() const { return columns_[target_]; }

  /// Columns a tree may split on: role predictor or cluster-target.
  std::vector<std::size_t> tree_feature_indices() const;

  /// Rows in the given order (repeats allowed). Level dictionaries are kept
  /// whole, even for levels absent from the subset.
  Dataset select_rows(std::span<const std::size_t> rows) const;
  /// Copy with the column of the same name replaced, or appended if new.
  Dataset with_column(Column column) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
  std::size_t outcome_ = 0;
  std::size_t target_ = 0;
};

/// Parses CSV text with a header row. Lines starting with '#' are comments.
/// Level dictionaries are built in first-appearance order. Extra columns
/// not named in the schema are ignored.
Dataset read_csv(std::istream& in, const Schema& schema);
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
/// Writes the header and rows; categorical cells as level names. Optional
/// comment lines are emitted first, each prefixed with "# ".
void write_csv(const Dataset& d, std::ostream& out, std::span<const std::string> comments = {});

inline constexpr std::string_view kOtherLevel = "Other";

/// Remaps every level with fewer than `min_count` rows to "Other" (reusing
/// an existing "Other" level). Surviving levels keep their relative order; a
/// new "Other" is appended. Zero-count levels are dropped. Idempotent.
Dataset bucket_rare_levels(const Dataset& d, std::string_view column, std::size_t min_count);

/// Adds (or replaces) a categorical column `new_name` whose value is
/// `mapping[level of source]`. Group names are listed in `group_names`.
/// The new column takes `role`.
Dataset add_mapped_column(const Dataset& d, std::string_view source, std::string_view new_name,
                          std::span<const std::uint32_t> mapping,
                          std::vector<std::string> group_names,
                          ColumnRole role = ColumnRole::ignore);

// --- indicator encoding -------------------------------------------------

enum class ReferencePolicy { most_frequent, first_level };
enum class TargetEncoding { exclude, indicators, group_labels };

struct EncodeOptions {
  ReferencePolicy reference = ReferencePolicy::most_frequent;
  TargetEncoding target = TargetEncoding::exclude;
  /// Extra categorical columns (any role except outcome) to expand into
  /// indicators, e.g. a derived CoFA-group column.
  std::vector<std::string> extra_indicators;
  /// Column exported as group_labels when target == group_labels; defaults
  /// to the cluster target.
  std::string group_column;
};

struct DesignMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<double> outcome;
  std::optional<std::vector<std::uint32_t>> group_labels;
  std::vector<std::string> group_names;

  std::size_t n_rows() const noexcept { return outcome.size(); }
  std::size_t n_features() const noexcept { return columns.size(); }
  DesignMatrix select_rows(std::span<const std::size_t> rows) const;
  DesignMatrix select_features(std::span<const std::size_t> features) const;
};

/// Feature layout derived from one dataset and re-applied to others (e.g.
/// the test side of a split), so train and test share columns.
struct EncodingPlan {
  struct Feature {
    std::string name;
    std::string column;
    std::optional<std::string> level;  // set for indicators
  };
  std::vector<Feature> features;
  std::optional<std::string> group_column;
  /// Dropped reference level per expanded column.
  std::map<std::string, std::string> reference_levels;
};

EncodingPlan plan_encoding(const Dataset& d, const EncodeOptions& options = {});
DesignMatrix apply_encoding(const EncodingPlan& plan, const Dataset& d);
DesignMatrix encode(const Dataset& d, const EncodeOptions& options = {});

// --- splitting ----------------------------------------------------------

struct RowSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded uniform shuffle; the first round(fraction * n) shuffled rows
/// train. Throws ConfigError when either side would be empty.
RowSplit split_rows(std::size_t n_rows, double train_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double train_fraction,
                                             std::uint64_t seed);

// --- synthetic cohorts --------------------------------------------------

struct CovariateSpec {
  enum class Distribution { normal, bernoulli };
  std::string name;
  Distribution distribution = Distribution::normal;
  double mean = 0.0;  // normal mean, or bernoulli p
  double sd = 1.0;    // normal only
  /// Log-odds per unit of the centred covariate; one entry shared by all
  /// groups, or one entry per planted group.
  std::vector<double> coefficient{0.0};
};

struct SyntheticSpec {
  std::size_t n_rows = 1000;
  std::vector<std::string> level_names;  // empty -> "L01", "L02", ...
  std::vector<double> level_weights;
  std::vector<std::uint32_t> planted_groups;  // level -> group
  std::vector<double> group_event_rates;
  std::vector<CovariateSpec> covariates;
  std::string target_name = "dx";
  std::string outcome_name = "outcome";
  std::uint64_t seed = 0;

  std::size_t n_levels() const noexcept { return level_weights.size(); }
  std::size_t n_groups() const noexcept { return group_event_rates.size(); }
  /// Throws ConfigError when an invariant fails.
  void validate() const;
  std::vector<std::string> resolved_level_names() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

/// Rows are independent: level ~ level_weights, covariates from their
/// distributions, outcome ~ Bernoulli(logistic(logit(rate[group]) +
/// sum_c beta[c][group] * (x_c - E[x_c]))).
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace cofa
