#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "readest/evaluation.hpp"
#include "readest/run_config.hpp"

namespace readest {

// Runs fn(0..n-1) on up to `threads` workers. The first exception (lowest
// index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct Datasets {
  FeatureMatrix timestamp;
  FeatureMatrix session;
};

Datasets build_datasets(const Corpus& corpus);

// Trains every kind on every round of the plan and scores it on the round's
// test sessions, in memory. `progress` (may be empty) is called per finished
// (round, kind).
RoundTable cross_validate(const Datasets& data, const CVPlan& plan, const std::vector<EstimatorKind>& kinds,
                          const TrainConfig& train, std::uint64_t seed, int threads,
                          const std::function<void(int, EstimatorKind, const MetricsReport&)>& progress = {});

int default_rounds(std::size_t n_users);

// File-based stages. Each writes config.ini (resolved) and run.json next to
// its outputs.
void stage_simulate(const RunConfig& config, const std::string& out_dir);
void stage_features(const RunConfig& config, const std::string& corpus_dir, const std::string& out_dir);
void stage_train(const RunConfig& config, const std::string& features_dir, const std::string& out_dir);
void stage_evaluate(const RunConfig& config, const std::string& features_dir, const std::string& models_dir,
                    const std::string& out_dir, bool with_ground_truth, bool dump_timestamps);
void stage_compare(const std::string& results_dir, const std::string& out_dir);
std::string stage_report(const std::string& results_dir);

// Baseline 2 scored on every labeled session of a corpus with and without
// normalizing its weights across visible messages, as an aligned table.
std::string baseline2_sensitivity(const Corpus& corpus);

// Feature column listing, one "<schema>.<column>" per line.
std::string schema_listing(std::optional<Granularity> only = std::nullopt);

// Converts a CSV export into a canonical corpus. The mapping file names the
// CSV columns and the event kind spellings:
//
//   {"columns": {"user": "...", "t": "...", "kind": "...", "x": "...", ...},
//    "time_unit": "s" | "ms",
//    "kinds": {"mousemove": "move", ...},
//    "labels": {"user": "...", "t": "...", "msg_id": "..."}}
//
// Layout files are read from `layouts_dir` (*.json, canonical format).
struct IngestOptions {
  std::string events_csv;
  std::string mapping_json;
  std::string layouts_dir;
  std::optional<std::string> labels_csv;
};
Corpus ingest_csv(const IngestOptions& options);
void stage_ingest(const IngestOptions& options, const std::string& out_dir);

}  // namespace readest
