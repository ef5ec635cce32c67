#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cofa/errors.hpp"
#include "cofa/pipeline.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> data, schema, synthetic, target, out;
  std::optional<std::size_t> min_count, trees, min_split, min_bucket, max_depth;
  std::optional<double> complexity, alpha, train_fraction;
  std::optional<std::size_t> null_replicates, k, folds, iterations, min_stratum_rows, workers;
  std::optional<std::uint64_t> seed;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("-c,--config", f.config, "JSON run configuration");
  sub->add_option("--data", f.data, "input CSV");
  sub->add_option("--schema", f.schema, "JSON schema for --data");
  sub->add_option("--synthetic", f.synthetic, "JSON synthetic cohort spec");
  sub->add_option("--target", f.target, "categorical column to cluster");
  sub->add_option("--min-count", f.min_count, "levels rarer than this become Other (100)");
  sub->add_option("--trees", f.trees, "trees per forest (100)");
  sub->add_option("--complexity", f.complexity, "minimum relative impurity decrease per split");
  sub->add_option("--min-split", f.min_split, "smallest node considered for a split (20)");
  sub->add_option("--min-bucket", f.min_bucket, "smallest child (7)");
  sub->add_option("--max-depth", f.max_depth, "deepest node (30)");
  sub->add_option("--null-replicates", f.null_replicates, "permuted forests (500)");
  sub->add_option("--alpha", f.alpha, "family-wise significance level (0.05)");
  sub->add_option("-k,--groups", f.k, "groups cut from the dendrogram (3)");
  sub->add_option("--folds", f.folds, "cross-validation folds (5)");
  sub->add_option("--iterations", f.iterations, "sub-sampling iterations (100)");
  sub->add_option("--train-fraction", f.train_fraction, "training share per iteration (0.8)");
  sub->add_option("--min-stratum-rows", f.min_stratum_rows, "smallest stratum given its own model (50)");
  sub->add_option("--seed", f.seed, "master seed (0)");
  sub->add_option("-o,--out", f.out, "output directory (cofa_out)");
  sub->add_option("-j,--workers", f.workers, "worker threads (1); results do not depend on it");
}

cofa::RunConfig build_config(const Flags& f) {
  cofa::RunConfig c;
  if (f.config) c = cofa::load_run_config(*f.config, c);
  if (f.data) c.data = *f.data;
  if (f.schema) c.schema = *f.schema;
  if (f.synthetic) c = cofa::run_config_from_json({{"synthetic", *f.synthetic}}, c, ".");
  if (f.target) c.target = *f.target;
  if (f.min_count) c.min_count = *f.min_count;
  if (f.trees) c.forest.n_trees = *f.trees;
  if (f.complexity) c.forest.complexity = *f.complexity;
  if (f.min_split) c.forest.min_split = *f.min_split;
  if (f.min_bucket) c.forest.min_bucket = *f.min_bucket;
  if (f.max_depth) c.forest.max_depth = *f.max_depth;
  if (f.null_replicates) c.null_replicates = *f.null_replicates;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.k) c.k = *f.k;
  if (f.folds) c.folds = *f.folds;
  if (f.iterations) c.iterations = *f.iterations;
  if (f.train_fraction) c.train_fraction = *f.train_fraction;
  if (f.min_stratum_rows) c.min_stratum_rows = *f.min_stratum_rows;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.output_dir = *f.out;
  if (f.workers) c.workers = *f.workers;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Categorical co-frequency analysis: cluster the levels of a categorical predictor "
               "from random-forest splits and evaluate the clusters in downstream models."};
  app.require_subcommand(1);

  Flags flags;
  struct Command {
    const char* name;
    const char* help;
    void (*run)(const cofa::RunConfig&);
  };
  const Command commands[] = {
      {"prepare", "load or generate data and bucket rare levels", cofa::cmd_prepare},
      {"cofa", "co-frequency matrix, permutation null, dendrogram and groups", cofa::cmd_cofa},
      {"cluster", "re-cut the dendrogram from the stored distance matrix", cofa::cmd_cluster},
      {"fit", "fit the five study models on the prepared data", cofa::cmd_fit},
      {"evaluate", "repeated sub-sampling comparison of the five models", cofa::cmd_evaluate},
      {"simulate", "write a synthetic cohort and its planted truth", cofa::cmd_simulate},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_flags(sub, flags);
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const cofa::RunConfig config = build_config(flags);
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) cmd->run(config);
  } catch (const cofa::ConfigError& e) {
    std::cerr << "cofa: configuration error: " << e.what() << '\n';
    return 1;
  } catch (const cofa::DataError& e) {
    std::cerr << "cofa: data error: " << e.what() << '\n';
    return 2;
  } catch (const cofa::NumericalError& e) {
    std::cerr << "cofa: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "cofa: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
