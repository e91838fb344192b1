#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "readest/error.hpp"
#include "readest/pipeline.hpp"

namespace {

using namespace readest;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> kinds;
  std::optional<int> rounds;
  std::optional<int> users;
  std::optional<std::string> mixture;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI run config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--threads", c.threads, "Worker cap")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (c.threads) config.threads = *c.threads;
  if (c.kinds) config.kinds = parse_kind_list(*c.kinds);
  if (c.rounds) config.cv_rounds = *c.rounds;
  if (c.users) config.sim.n_users = *c.users;
  if (c.mixture) {
    config.mixture = *c.mixture;
    config.sim.mixture = mixture_preset(*c.mixture);
  }
  config.sim.seed = config.seed;
  config.train.seed = config.seed;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"readest: per-message reading time estimation from interaction logs"};
  app.require_subcommand(1);
  Common common;
  std::string out, corpus_dir, features_dir, models_dir, results_dir, granularity;
  bool ground_truth = false, dump_timestamps = false;
  IngestOptions ingest;
  std::string labels;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic labeled corpus");
  add_common(simulate, common);
  simulate->add_option("--out", out, "Corpus directory")->required();
  simulate->add_option("--users", common.users, "Number of simulated users");
  simulate->add_option("--mixture", common.mixture, "Archetype mixture (mixed, tracks-parked)");

  auto* ingest_cmd = app.add_subcommand("ingest", "Convert a CSV event export into a canonical corpus");
  ingest_cmd->add_option("--events", ingest.events_csv, "Events CSV")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--mapping", ingest.mapping_json, "Column mapping JSON")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--layouts", ingest.layouts_dir, "Directory of layout JSON files")
      ->required()
      ->check(CLI::ExistingDirectory);
  ingest_cmd->add_option("--labels", labels, "Gaze labels CSV")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", out, "Corpus directory")->required();

  auto* features = app.add_subcommand("features", "Build timestamp and sessional feature matrices");
  add_common(features, common);
  features->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  features->add_option("--out", out, "Feature directory")->required();

  auto* train = app.add_subcommand("train", "Train estimators for every cross-validation round");
  add_common(train, common);
  train->add_option("--features", features_dir, "Feature directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out, "Model directory")->required();
  train->add_option("--kinds", common.kinds, "Comma-separated estimator kinds, or 'all'");
  train->add_option("--rounds", common.rounds, "Cross-validation rounds (0 = 8 per user)");

  auto* evaluate = app.add_subcommand("evaluate", "Score checkpoints on their test sessions");
  add_common(evaluate, common);
  evaluate->add_option("--features", features_dir, "Feature directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--models", models_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", out, "Results directory")->required();
  evaluate->add_flag("--ground-truth", ground_truth, "Also score the ground truth as an estimator");
  evaluate->add_flag("--dump-timestamps", dump_timestamps, "Write per-second probabilities");

  auto* compare = app.add_subcommand("compare", "Paired comparisons across rounds");
  compare->add_option("--results", results_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--out", out, "Output directory (default: the results directory)");

  auto* report = app.add_subcommand("report", "Print a human-readable summary");
  report->add_option("--results", results_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
  std::string sensitivity_corpus;
  report->add_option("--b2-sensitivity", sensitivity_corpus,
                     "Also score baseline 2 with and without normalization on this labeled corpus")
      ->check(CLI::ExistingDirectory);

  auto* schema = app.add_subcommand("schema", "List feature columns");
  schema->add_option("--granularity", granularity, "timestamp or session")
      ->check(CLI::IsMember({"timestamp", "session"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      stage_simulate(resolve(common), out);
    } else if (ingest_cmd->parsed()) {
      if (!labels.empty()) ingest.labels_csv = labels;
      stage_ingest(ingest, out);
    } else if (features->parsed()) {
      stage_features(resolve(common), corpus_dir, out);
    } else if (train->parsed()) {
      stage_train(resolve(common), features_dir, out);
    } else if (evaluate->parsed()) {
      stage_evaluate(resolve(common), features_dir, models_dir, out, ground_truth, dump_timestamps);
    } else if (compare->parsed()) {
      stage_compare(results_dir, out.empty() ? results_dir : out);
    } else if (report->parsed()) {
      std::cout << stage_report(results_dir);
      if (!sensitivity_corpus.empty())
        std::cout << "\nBaseline 2 normalization sensitivity (all sessions of " << sensitivity_corpus << ")\n\n"
                  << baseline2_sensitivity(load_corpus(sensitivity_corpus));
    } else if (schema->parsed()) {
      std::optional<Granularity> only;
      if (granularity == "timestamp") only = Granularity::timestamp;
      if (granularity == "session") only = Granularity::session;
      std::cout << schema_listing(only);
    }
  } catch (const std::exception& e) {
    std::cerr << "readest: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
