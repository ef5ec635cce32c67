#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofa/cluster.hpp"
#include "cofa/cofrequency.hpp"
#include "cofa/datamodel.hpp"
#include "cofa/eval.hpp"
#include "cofa/forest.hpp"
#include "cofa/glm.hpp"

namespace cofa {

/// Forest settings used for CoFA unless overridden. Identical to the CART
/// defaults except for the complexity threshold; see README.
ForestParams default_cofa_forest();

struct RunConfig {
  std::optional<std::filesystem::path> data;    // CSV input
  std::optional<std::filesystem::path> schema;  // JSON schema for `data`
  std::optional<SyntheticSpec> synthetic;       // used when `data` is unset
  std::string target;                           // cluster-target override
  std::size_t min_count = 100;
  ForestParams forest = default_cofa_forest();
  std::size_t null_replicates = 500;
  double alpha = 0.05;
  std::size_t k = 3;
  std::size_t folds = 5;
  std::size_t iterations = 100;
  double train_fraction = 0.8;
  std::size_t min_stratum_rows = 50;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "cofa_out";
  std::size_t workers = 1;

  void validate() const;
};

/// Keys mirror the field names; "forest" holds ForestParams keys and
/// "synthetic" holds a synthetic spec object or a path to one. Unknown keys
/// are a ConfigError. Relative paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base = {},
                               const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
nlohmann::json run_config_to_json(const RunConfig& config);

/// FNV-1a over the canonical JSON of every setting that can change results
/// (output_dir and workers are left out).
std::string config_hash(const RunConfig& config);
/// "cofa config_hash=<hex> seed=<seed>"
std::string provenance_line(const RunConfig& config);

// --- in-memory stages ------------------------------------------------------

struct CofaOptions {
  ForestParams forest = default_cofa_forest();
  std::size_t null_replicates = 500;
  double alpha = 0.05;
  std::size_t k = 3;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool retain_null_samples = false;
};

struct CofaResult {
  std::size_t trivial_roots = 0;  // observed forest
  CoFrequencyMatrix observed;
  NullDistribution null;
  SignificanceMask mask;
  DistanceMatrix distance;
  Dendrogram dendrogram;
  ClusterAssignment assignment;
};

/// Observed forest, permutation null, Bonferroni mask, distance, complete
/// linkage and the cut at k. Stage seeds derive from options.seed.
CofaResult run_cofa(const Dataset& d, const CofaOptions& options);

inline constexpr std::string_view kGroupColumn = "cofa_group";

/// Adds the "cofa_group" column (levels "G1".."Gk") by matching level names
/// of the cluster target against the assignment.
Dataset attach_groups(const Dataset& d, const ClusterAssignment& assignment);

struct StudyDesign {
  std::size_t folds = 5;
  std::size_t min_stratum_rows = 50;
  LassoOptions lasso;
  RefitOptions refit;
  bool with_groups = true;  // needs the "cofa_group" column
};

/// The five compared models: baseline, target_indicators,
/// group_indicators, clusterwise_target, clusterwise_group. Baseline also
/// reports weighted AUC over the strata of both clusterwise models.
std::vector<Procedure> study_procedures(const Dataset& d, const StudyDesign& design);

// --- commands --------------------------------------------------------------

/// Loads the configured CSV or generates the synthetic cohort.
Dataset load_input(const RunConfig& config);

void cmd_prepare(const RunConfig& config);
void cmd_cofa(const RunConfig& config);
void cmd_cluster(const RunConfig& config);
void cmd_fit(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_simulate(const RunConfig& config);

}  // namespace cofa
