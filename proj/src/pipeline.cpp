#include "cofa/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cofa/errors.hpp"
#include "cofa/random.hpp"
#include "cofa/text.hpp"

namespace cofa {

namespace fs = std::filesystem;

ForestParams default_cofa_forest() {
  ForestParams p;
  p.complexity = 0.002;
  return p;
}

void RunConfig::validate() const {
  if (!data && !synthetic) throw ConfigError("configure either a data file or a synthetic spec");
  if (data && !schema) throw ConfigError("a data file needs a schema");
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  forest.validate();
  if (null_replicates < 2) throw ConfigError("null_replicates must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (iterations < 2) throw ConfigError("iterations must be at least 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0,1)");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (synthetic) synthetic->validate();
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("run configuration must be a JSON object");
  static const std::vector<std::string> known = {
      "data",  "schema",          "synthetic",     "target", "min_count",       "forest",
      "null_replicates", "alpha", "k",             "folds",  "iterations",      "train_fraction",
      "min_stratum_rows", "seed", "output_dir",    "workers"};
  for (const auto& [key, value] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown configuration key '" + key + "'");
  try {
    RunConfig c = std::move(base);
    if (doc.contains("data")) c.data = resolve(doc["data"].get<std::string>(), base_dir);
    if (doc.contains("schema")) c.schema = resolve(doc["schema"].get<std::string>(), base_dir);
    if (doc.contains("synthetic")) {
      const auto& s = doc["synthetic"];
      c.synthetic = synthetic_spec_from_json(
          s.is_string() ? read_json_file(resolve(s.get<std::string>(), base_dir)) : s);
    }
    if (doc.contains("target")) c.target = doc["target"].get<std::string>();
    if (doc.contains("min_count")) c.min_count = doc["min_count"].get<std::size_t>();
    if (doc.contains("forest")) c.forest = forest_params_from_json(doc["forest"], c.forest);
    if (doc.contains("null_replicates")) c.null_replicates = doc["null_replicates"].get<std::size_t>();
    if (doc.contains("alpha")) c.alpha = doc["alpha"].get<double>();
    if (doc.contains("k")) c.k = doc["k"].get<std::size_t>();
    if (doc.contains("folds")) c.folds = doc["folds"].get<std::size_t>();
    if (doc.contains("iterations")) c.iterations = doc["iterations"].get<std::size_t>();
    if (doc.contains("train_fraction")) c.train_fraction = doc["train_fraction"].get<double>();
    if (doc.contains("min_stratum_rows")) c.min_stratum_rows = doc["min_stratum_rows"].get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("output_dir")) c.output_dir = resolve(doc["output_dir"].get<std::string>(), base_dir);
    if (doc.contains("workers")) c.workers = doc["workers"].get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  return run_config_from_json(read_json_file(path), std::move(base), path.parent_path());
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json doc = {{"target", c.target},
                        {"min_count", c.min_count},
                        {"forest", forest_params_to_json(c.forest)},
                        {"null_replicates", c.null_replicates},
                        {"alpha", c.alpha},
                        {"k", c.k},
                        {"folds", c.folds},
                        {"iterations", c.iterations},
                        {"train_fraction", c.train_fraction},
                        {"min_stratum_rows", c.min_stratum_rows},
                        {"seed", c.seed},
                        {"output_dir", c.output_dir.string()},
                        {"workers", c.workers}};
  if (c.data) doc["data"] = c.data->string();
  if (c.schema) doc["schema"] = c.schema->string();
  if (c.synthetic) doc["synthetic"] = synthetic_spec_to_json(*c.synthetic);
  return doc;
}

std::string config_hash(const RunConfig& config) {
  nlohmann::json doc = run_config_to_json(config);
  doc.erase("output_dir");
  doc.erase("workers");
  // Hash input contents rather than their locations.
  for (const char* key : {"data", "schema"}) {
    if (!doc.contains(key)) continue;
    std::ifstream in(doc[key].get<std::string>(), std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    doc[key] = hex64(fnv1a64(bytes.str()));
  }
  return hex64(fnv1a64(doc.dump()));
}

std::string provenance_line(const RunConfig& config) {
  return "cofa config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed);
}

// --- in-memory stages ------------------------------------------------------

CofaResult run_cofa(const Dataset& d, const CofaOptions& options) {
  CofaResult r;
  ForestParams fp = options.forest;
  fp.seed = derive_seed(options.seed, {stream::observed_forest});
  const Forest forest = fit_forest(d, fp, options.workers);
  r.trivial_roots = forest.trivial_root_count;
  r.observed = cofa_matrix(forest);

  NullOptions no;
  no.retain_samples = options.retain_null_samples;
  no.workers = options.workers;
  r.null = null_distribution(d, options.forest, options.null_replicates,
                             derive_seed(options.seed, {stream::null_forest}), no);
  r.mask = significance_mask(r.observed, r.null, options.alpha);
  r.distance = to_distance(r.observed, r.mask);
  r.dendrogram = complete_linkage(r.distance);
  r.assignment = cut_tree(r.dendrogram, options.k);
  return r;
}

Dataset attach_groups(const Dataset& d, const ClusterAssignment& assignment) {
  const Column& target = d.cluster_target();
  std::vector<std::uint32_t> mapping(target.n_levels());
  for (std::uint32_t l = 0; l < target.n_levels(); ++l) {
    auto it = std::find(assignment.level_names.begin(), assignment.level_names.end(), target.levels[l]);
    if (it == assignment.level_names.end())
      throw DataError("level '" + target.levels[l] + "' has no CoFA group");
    mapping[l] = assignment.group[static_cast<std::size_t>(it - assignment.level_names.begin())] - 1;
  }
  return add_mapped_column(d, target.schema.name, kGroupColumn, mapping, assignment.group_names());
}

namespace {

using Scorer = std::function<std::vector<double>(const Dataset&, const Dataset&, std::uint64_t)>;

Scorer simple_model(EncodeOptions enc, const StudyDesign& design) {
  return [enc = std::move(enc), design](const Dataset& train, const Dataset& test, std::uint64_t seed) {
    const EncodingPlan plan = plan_encoding(train, enc);
    PipelineOptions po;
    po.n_folds = design.folds;
    po.seed = seed;
    po.lasso = design.lasso;
    po.refit = design.refit;
    const LogisticModel m = fit_pipeline(apply_encoding(plan, train), po);
    return m.predict(apply_encoding(plan, test));
  };
}

Scorer clusterwise_model(std::string stratifier, const StudyDesign& design) {
  return [stratifier = std::move(stratifier), design](const Dataset& train, const Dataset& test,
                                                      std::uint64_t seed) {
    EncodeOptions enc;
    enc.target = TargetEncoding::group_labels;
    enc.group_column = stratifier;
    const EncodingPlan plan = plan_encoding(train, enc);
    PipelineOptions po;
    po.n_folds = design.folds;
    po.seed = seed;
    po.lasso = design.lasso;
    po.refit = design.refit;
    const ClusterwiseModel m =
        fit_clusterwise(apply_encoding(plan, train), po, design.min_stratum_rows, stratifier);
    return m.predict(apply_encoding(plan, test));
  };
}

}  // namespace

std::vector<Procedure> study_procedures(const Dataset& d, const StudyDesign& design) {
  const std::string target = d.cluster_target().schema.name;
  const std::string group(kGroupColumn);
  if (design.with_groups && !d.find_column(group))
    throw ConfigError("dataset has no '" + group + "' column; run cofa first");

  std::vector<Procedure> out;
  Procedure baseline{"baseline", simple_model({}, design), {target}};
  if (design.with_groups) baseline.weightings.push_back(group);
  out.push_back(std::move(baseline));

  EncodeOptions with_target;
  with_target.target = TargetEncoding::indicators;
  out.push_back({"target_indicators", simple_model(with_target, design), {}});
  if (design.with_groups) {
    EncodeOptions with_group;
    with_group.extra_indicators = {group};
    out.push_back({"group_indicators", simple_model(with_group, design), {}});
  }
  out.push_back({"clusterwise_target", clusterwise_model(target, design), {target}});
  if (design.with_groups) out.push_back({"clusterwise_group", clusterwise_model(group, design), {group}});
  return out;
}

// --- commands --------------------------------------------------------------

namespace {

// Re-throws with the stage named, keeping the error category.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, nlohmann::json doc, const RunConfig& config) {
  doc["config_hash"] = config_hash(config);
  doc["seed"] = config.seed;
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

// Moves the cluster-target role to `target` when the config overrides it.
Schema retarget(Schema schema, const std::string& target) {
  bool found = false;
  for (auto& col : schema) {
    if (col.name == target) {
      found = true;
      if (col.kind != ColumnKind::categorical)
        throw SchemaError("cluster target '" + target + "' is not categorical");
      col.role = ColumnRole::cluster_target;
    } else if (col.role == ColumnRole::cluster_target) {
      col.role = ColumnRole::predictor;
    }
  }
  if (!found) throw SchemaError("schema has no column '" + target + "'");
  validate_schema(schema);
  return schema;
}

SyntheticSpec seeded_spec(const RunConfig& c) {
  SyntheticSpec spec = *c.synthetic;
  if (spec.seed == 0) spec.seed = derive_seed(c.seed, {stream::synthetic});
  return spec;
}

fs::path prepared_csv(const RunConfig& c) { return c.output_dir / "prepared.csv"; }
fs::path prepared_schema(const RunConfig& c) { return c.output_dir / "prepared_schema.json"; }

Dataset load_prepared(const RunConfig& c) {
  if (!fs::exists(prepared_csv(c)))
    throw ConfigError("no prepared dataset in '" + c.output_dir.string() + "'; run prepare first");
  return load_csv(prepared_csv(c), load_schema(prepared_schema(c)));
}

ClusterAssignment load_assignment(const RunConfig& c) {
  const fs::path path = c.output_dir / "assignment.csv";
  std::ifstream in(path);
  if (!in) throw ConfigError("no CoFA assignment in '" + c.output_dir.string() + "'; run cofa first");
  return read_assignment_csv(in);
}

void write_cluster_artifacts(const RunConfig& c, const Dendrogram& dg, const ClusterAssignment& a) {
  const std::vector<std::string> header{provenance_line(c)};
  {
    auto out = open_out(c.output_dir / "dendrogram.nwk");
    out << '[' << header[0] << "]\n" << export_newick(dg) << '\n';
  }
  {
    auto out = open_out(c.output_dir / "merges.csv");
    write_merge_table_csv(out, dg, header);
  }
  {
    auto out = open_out(c.output_dir / "assignment.csv");
    write_assignment_csv(out, a, header);
  }
}

// Table-1 style summary of each group.
void write_group_summary(const RunConfig& c, const Dataset& d, const ClusterAssignment& a) {
  const Column& target = d.cluster_target();
  const auto& y = d.outcome().values;
  std::vector<std::size_t> n(a.k, 0), events(a.k, 0);
  std::vector<std::vector<std::string>> members(a.k);
  std::map<std::string, std::uint32_t> group_of;
  for (std::size_t l = 0; l < a.level_names.size(); ++l) {
    group_of[a.level_names[l]] = a.group[l];
    members[a.group[l] - 1].push_back(a.level_names[l]);
  }
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    const auto g = group_of.at(target.levels[target.codes[r]]) - 1;
    ++n[g];
    events[g] += y[r] > 0.5;
  }
  auto out = open_out(c.output_dir / "group_summary.csv");
  out << "# " << provenance_line(c) << '\n' << "group,n_levels,n,events,event_rate,levels\n";
  for (std::size_t g = 0; g < a.k; ++g) {
    std::string joined;
    for (const auto& m : members[g]) joined += (joined.empty() ? "" : ";") + m;
    out << "G" << g + 1 << ',' << members[g].size() << ',' << n[g] << ',' << events[g] << ','
        << format_number(n[g] ? static_cast<double>(events[g]) / static_cast<double>(n[g]) : 0.0)
        << ',' << csv_field(joined) << '\n';
  }
}

StudyDesign design_of(const RunConfig& c) {
  StudyDesign design;
  design.folds = c.folds;
  design.min_stratum_rows = c.min_stratum_rows;
  return design;
}

}  // namespace

Dataset load_input(const RunConfig& config) {
  config.validate();
  if (config.data) {
    Schema schema = load_schema(*config.schema);
    if (!config.target.empty()) schema = retarget(std::move(schema), config.target);
    return load_csv(*config.data, schema);
  }
  return generate_synthetic(seeded_spec(config));
}

void cmd_simulate(const RunConfig& config) {
  config.validate();
  if (!config.synthetic) throw ConfigError("simulate needs a synthetic spec");
  in_stage("simulate", [&] {
    ensure_dir(config.output_dir);
    const SyntheticSpec spec = seeded_spec(config);
    const Dataset d = generate_synthetic(spec);
    const std::vector<std::string> header{provenance_line(config)};
    {
      auto out = open_out(config.output_dir / "synthetic.csv");
      write_csv(d, out, header);
    }
    write_json(config.output_dir / "synthetic_schema.json", schema_to_json(d.schema()), config);
    auto out = open_out(config.output_dir / "planted_truth.csv");
    out << "# " << header[0] << '\n' << "level,group\n";
    const auto names = spec.resolved_level_names();
    for (std::size_t l = 0; l < names.size(); ++l)
      out << csv_field(names[l]) << ',' << spec.planted_groups[l] + 1 << '\n';
  });
}

void cmd_prepare(const RunConfig& config) {
  config.validate();
  const Dataset raw = in_stage("load", [&] { return load_input(config); });
  in_stage("prepare", [&] {
    ensure_dir(config.output_dir);
    const Column& before = raw.cluster_target();
    const Dataset d = bucket_rare_levels(raw, before.schema.name, config.min_count);
    const Column& after = d.cluster_target();
    const std::vector<std::string> header{provenance_line(config)};
    {
      auto out = open_out(prepared_csv(config));
      write_csv(d, out, header);
    }
    write_json(prepared_schema(config), schema_to_json(d.schema()), config);

    const auto counts = before.level_counts();
    std::vector<std::size_t> events(before.n_levels(), 0);
    const auto& y = raw.outcome().values;
    for (std::size_t r = 0; r < raw.n_rows(); ++r) events[before.codes[r]] += y[r] > 0.5;
    nlohmann::json other = nlohmann::json::array();
    {
      auto out = open_out(config.output_dir / "preparation_report.csv");
      out << "# " << header[0] << '\n' << "level,count,events,event_rate,prepared_level\n";
      for (std::uint32_t l = 0; l < before.n_levels(); ++l) {
        if (counts[l] == 0) continue;
        const bool kept = counts[l] >= config.min_count && before.levels[l] != kOtherLevel;
        const std::string mapped = kept ? before.levels[l] : std::string(kOtherLevel);
        if (!kept) other.push_back(before.levels[l]);
        out << csv_field(before.levels[l]) << ',' << counts[l] << ',' << events[l] << ','
            << format_number(static_cast<double>(events[l]) / static_cast<double>(counts[l])) << ','
            << csv_field(mapped) << '\n';
      }
    }
    if (config.synthetic) {
      const SyntheticSpec spec = seeded_spec(config);
      auto out = open_out(config.output_dir / "planted_truth.csv");
      out << "# " << header[0] << '\n' << "level,group\n";
      const auto names = spec.resolved_level_names();
      for (std::size_t l = 0; l < names.size(); ++l)
        out << csv_field(names[l]) << ',' << spec.planted_groups[l] + 1 << '\n';
    }
    write_json(config.output_dir / "preparation_summary.json",
               {{"n_rows", d.n_rows()},
                {"target", after.schema.name},
                {"min_count", config.min_count},
                {"levels_before", before.n_levels()},
                {"levels_after", after.n_levels()},
                {"levels", after.levels},
                {"other_members", other}},
               config);
  });
}

void cmd_cofa(const RunConfig& config) {
  config.validate();
  const Dataset d = in_stage("load", [&] { return load_prepared(config); });
  CofaOptions o;
  o.forest = config.forest;
  o.null_replicates = config.null_replicates;
  o.alpha = config.alpha;
  o.k = config.k;
  o.seed = config.seed;
  o.workers = config.workers;
  const CofaResult r = in_stage("cofa", [&] { return run_cofa(d, o); });

  in_stage("write cofa artifacts", [&] {
    const std::vector<std::string> header{provenance_line(config)};
    const auto& names = r.observed.level_names;
    auto square = [&](const char* file, const SquareMatrix<double>& m) {
      auto out = open_out(config.output_dir / file);
      write_square_csv(out, names, m, header);
    };
    square("cofa_s.csv", r.observed.s);
    square("cofa_z.csv", r.mask.z);
    SquareMatrix<double> mask(names.size(), 0.0);
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = 0; j < names.size(); ++j) mask(i, j) = r.mask.significant(i, j);
    square("cofa_mask.csv", mask);
    square("cofa_distance.csv", r.distance.d);
    {
      auto out = open_out(config.output_dir / "cofa_null.csv");
      write_null_summary_csv(out, r.null, header);
    }
    write_cluster_artifacts(config, r.dendrogram, r.assignment);
    write_group_summary(config, d, r.assignment);
    write_json(config.output_dir / "cofa_summary.json",
               {{"levels", names.size()},
                {"n_tests", r.mask.n_tests},
                {"alpha", r.mask.alpha},
                {"z_cutoff", r.mask.cutoff},
                {"significant_pairs", r.mask.n_significant()},
                {"trivial_roots", r.trivial_roots},
                {"null_trivial_roots", r.null.trivial_root_count},
                {"null_replicates", r.null.n_replicates},
                {"k", r.assignment.k}},
               config);
  });
}

void cmd_cluster(const RunConfig& config) {
  config.validate();
  in_stage("cluster", [&] {
    std::ifstream in(config.output_dir / "cofa_distance.csv");
    if (!in) throw ConfigError("no distance matrix in '" + config.output_dir.string() + "'; run cofa first");
    std::vector<std::string> names;
    const SquareMatrix<double> d = read_square_csv(in, names);
    const Dendrogram dg = complete_linkage(d, names);
    const ClusterAssignment a = cut_tree(dg, config.k);
    write_cluster_artifacts(config, dg, a);
    write_group_summary(config, load_prepared(config), a);
  });
}

void cmd_fit(const RunConfig& config) {
  config.validate();
  const Dataset d = in_stage("load", [&] { return attach_groups(load_prepared(config), load_assignment(config)); });
  in_stage("fit", [&] {
    ensure_dir(config.output_dir / "models");
    PipelineOptions po;
    po.n_folds = config.folds;
    po.seed = derive_seed(config.seed, {stream::cv_folds});
    po.workers = config.workers;
    const std::string target = d.cluster_target().schema.name;
    const std::string group(kGroupColumn);

    auto simple = [&](const char* name, EncodeOptions enc) {
      const LogisticModel m = fit_pipeline(encode(d, enc), po);
      write_json(config.output_dir / "models" / (std::string(name) + ".json"), model_to_json(m), config);
    };
    auto clusterwise = [&](const char* name, const std::string& column) {
      EncodeOptions enc;
      enc.target = TargetEncoding::group_labels;
      enc.group_column = column;
      const ClusterwiseModel m = fit_clusterwise(encode(d, enc), po, config.min_stratum_rows, column);
      write_json(config.output_dir / "models" / (std::string(name) + ".json"), model_to_json(m), config);
    };
    simple("baseline", {});
    EncodeOptions with_target;
    with_target.target = TargetEncoding::indicators;
    simple("target_indicators", with_target);
    EncodeOptions with_group;
    with_group.extra_indicators = {group};
    simple("group_indicators", with_group);
    clusterwise("clusterwise_target", target);
    clusterwise("clusterwise_group", group);
  });
}

void cmd_evaluate(const RunConfig& config) {
  config.validate();
  const Dataset d = in_stage("load", [&] { return attach_groups(load_prepared(config), load_assignment(config)); });
  const EvaluationReport report = in_stage("evaluate", [&] {
    const auto procedures = study_procedures(d, design_of(config));
    SubsamplingOptions so;
    so.iterations = config.iterations;
    so.train_fraction = config.train_fraction;
    so.seed = derive_seed(config.seed, {stream::subsample});
    so.workers = config.workers;
    return repeated_subsampling(d, procedures, so);
  });
  in_stage("write evaluation", [&] {
    const std::vector<std::string> header{provenance_line(config)};
    write_json(config.output_dir / "evaluation.json", report_to_json(report), config);
    {
      auto out = open_out(config.output_dir / "evaluation_iterations.csv");
      write_iterations_csv(out, report, header);
    }
    {
      auto out = open_out(config.output_dir / "evaluation_tests.csv");
      write_tests_csv(out, report, header);
    }
    auto out = open_out(config.output_dir / "evaluation_subgroups.csv");
    write_subgroups_csv(out, report, header);
  });
}

}  // namespace cofa
