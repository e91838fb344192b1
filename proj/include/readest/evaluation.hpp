#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "readest/aggregation.hpp"
#include "readest/dataset.hpp"
#include "readest/estimators.hpp"
#include "readest/stats.hpp"

namespace readest {

// Error threshold between the percentage and absolute buckets, seconds.
inline constexpr double kShortReadSeconds = 10;

// Truth for one (session, message).
struct SessionTruth {
  std::string user_id;
  std::string session_id;
  std::string msg_id;
  int words = 1;
  double time = 0;
};

// One model's estimate for a (session, message). Category models carry only
// a level.
struct SessionEstimate {
  std::string user_id;
  std::string session_id;
  std::string msg_id;
  std::optional<double> time;
  ReadLevel level = ReadLevel::skip;
  std::optional<std::array<double, 3>> class_probs;
};

// num / den, undefined when den = 0.
struct Ratio {
  std::size_t num = 0;
  std::size_t den = 0;
  std::optional<double> value() const {
    return den ? std::optional<double>(double(num) / double(den)) : std::nullopt;
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

enum class Metric {
  per_error,
  abs_error,
  accuracy,
  skim_precision,
  skim_recall,
  detail_precision,
  detail_recall,
  read_precision,
  read_recall,
};

inline constexpr std::array<Metric, 9> kAllMetrics{
    Metric::per_error,        Metric::abs_error,     Metric::accuracy,       Metric::skim_precision, Metric::skim_recall,
    Metric::detail_precision, Metric::detail_recall, Metric::read_precision, Metric::read_recall,
};

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);
// Lower is better for the two error metrics.
bool lower_is_better(Metric m);

// per_error is a fraction (0.25 = 25%) over messages whose true time is at
// least 10 s; abs_error is in seconds over the rest. Both are empty when the
// model gives no times or the bucket is empty.
struct MetricsReport {
  std::optional<double> per_error;
  std::size_t per_count = 0;
  std::optional<double> abs_error;
  std::size_t abs_count = 0;
  Ratio accuracy;
  Ratio skim_precision, skim_recall;
  Ratio detail_precision, detail_recall;
  Ratio read_precision, read_recall;

  std::optional<double> value(Metric m) const;
};

// Joins estimates to truth by (session, message); throws JoinError on a
// missing, extra or duplicated key.
MetricsReport compute_metrics(const std::vector<SessionEstimate>& estimates, const std::vector<SessionTruth>& truth);

std::vector<SessionTruth> session_truth(const FeatureMatrix& session_data);

// Sums per-second probabilities into session estimates. `rows` index into
// `data` (a per-timestamp matrix) and `p` is aligned with them. Each message
// must cover every second its session spans in `rows`.
std::vector<SessionEstimate> aggregate_timestamp_predictions(const FeatureMatrix& data,
                                                             std::span<const std::size_t> rows,
                                                             std::span<const double> p,
                                                             const std::map<std::string, int>& words);

// Word count per "session_id\tmsg_id", from a per-session matrix.
std::map<std::string, int> word_index(const FeatureMatrix& session_data);

struct CVRound {
  int index = 0;
  std::string test_user;
  std::vector<std::string> train_sessions;
  std::vector<std::string> validation_sessions;
  std::vector<std::string> test_sessions;
};

struct CVPlan {
  std::uint64_t seed = 0;
  std::vector<CVRound> rounds;
};

struct UserSessions {
  std::string user_id;
  std::vector<std::string> session_ids;
};

std::vector<UserSessions> user_sessions(const FeatureMatrix& data);

// Round r tests users[r % users.size()]. Every other user contributes
// ceil(sessions / 8) randomly drawn validation sessions and trains on the
// rest. Throws ConfigError with fewer than 2 users or a user without sessions.
CVPlan make_cv_plan(const std::vector<UserSessions>& users, int n_rounds, std::uint64_t seed);

std::string serialize_cv_plan(const CVPlan& plan);
CVPlan parse_cv_plan(std::string_view json_text);

// Row indices of `data` whose session is in `sessions`.
std::vector<std::size_t> rows_for_sessions(const FeatureMatrix& data, const std::vector<std::string>& sessions);

// Per-round training seed for a kind.
std::uint64_t round_seed(std::uint64_t seed, int round, EstimatorKind kind);

// Estimates of an estimator on the test sessions of a round.
std::vector<SessionEstimate> estimate_sessions(const Estimator& est, const FeatureMatrix& timestamp_data,
                                               const FeatureMatrix& session_data,
                                               const std::vector<std::string>& sessions);

// Ground truth served as an estimator.
std::vector<SessionEstimate> ground_truth_estimates(const FeatureMatrix& session_data,
                                                    const std::vector<std::string>& sessions);

std::string serialize_estimates(const std::vector<SessionEstimate>& estimates);

// model -> round -> report
using RoundTable = std::map<std::string, std::map<int, MetricsReport>>;

// Mean over rounds that define the metric.
std::optional<double> mean_metric(const std::map<int, MetricsReport>& rounds, Metric m);

struct ComparisonFamily {
  std::string name;
  std::vector<std::pair<std::string, std::string>> pairs;  // (before, after)
};

// The five model-comparison questions.
std::vector<ComparisonFamily> default_families();

struct PairComparison {
  std::string family;
  std::string before, after;
  Metric metric = Metric::per_error;
  std::optional<double> mean_before, mean_after;
  PairedTTest test;
  std::optional<double> adjusted_p;
};

struct ComparisonReport {
  std::vector<PairComparison> rows;  // family, pair, then metric order
};

// Paired t-tests over rounds where both models define the metric, adjusted
// per (family, metric). Throws PairingError when a pair's round sets differ
// and LookupError for a model missing from the table.
ComparisonReport paired_comparisons(const RoundTable& table, const std::vector<ComparisonFamily>& families);

std::string metrics_json(const MetricsReport& r);
std::string round_table_json(const RoundTable& table);
RoundTable parse_round_table(std::string_view json_text);
std::string comparison_json(const ComparisonReport& report);

// "*" at p <= 0.05, "." at p <= 0.10.
std::string significance_marker(std::optional<double> p);

// Aligned text: one row per model, mean of each metric in percent (abs_error
// in seconds).
std::string summary_table(const RoundTable& table);
// One row per pair: "before->after (adjusted p marker)" for each metric.
std::string comparison_table(const ComparisonReport& report);

}  // namespace readest
