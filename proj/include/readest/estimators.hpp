#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "readest/aggregation.hpp"
#include "readest/dataset.hpp"
#include "readest/features.hpp"
#include "readest/neural.hpp"

namespace readest {

enum class EstimatorKind {
  Baseline1,
  Baseline2,
  Baseline3,
  Logistic,
  BaselineNN,
  PatternBaselineNN,
  NN,
  PatternNN,
  PatternSessionalNN,
  PatternCategoryNN,
};

std::string_view to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(std::string_view s);  // throws ConfigError
const std::vector<EstimatorKind>& all_estimator_kinds();

Granularity granularity_of(EstimatorKind kind);
bool is_trainable(EstimatorKind kind);
LossKind loss_of(EstimatorKind kind);

// Feature columns feeding each input of a kind. Heuristic kinds read one
// baseline column through tower_a; single-tower networks leave tower_b empty.
struct InputRouting {
  std::vector<std::string> tower_a;
  std::vector<std::string> tower_b;
};
InputRouting routing_for(EstimatorKind kind);

// Untrained network of the kind's architecture, seeded.
Network make_network(EstimatorKind kind, std::uint64_t seed);

struct Estimator {
  EstimatorKind kind = EstimatorKind::Baseline1;
  std::string schema_version;
  std::optional<Network> network;  // empty for heuristic kinds
  Standardizer input_a;
  Standardizer input_b;
  TrainConfig train_config;
  TrainTrace trace;

  Granularity granularity() const { return granularity_of(kind); }
};

// Trains (or, for heuristic kinds, just wraps) an estimator. `data` must have
// the kind's granularity and labels; train and validation rows must be
// disjoint. Input standardization is fitted on the training rows only.
Estimator build_estimator(EstimatorKind kind, const FeatureMatrix& data, std::span<const std::size_t> train_rows,
                          std::span<const std::size_t> validation_rows, const TrainConfig& config);

struct SessionOutput {
  std::optional<double> time;                       // PatternSessionalNN
  std::optional<std::array<double, 3>> class_probs;  // PatternCategoryNN
};

// Argmax over (skip, skim, detail); ties go to the lower level.
ReadLevel predicted_level(const std::array<double, 3>& probs);

TimestampPrediction predict_timestamp(const Estimator& est, const TimestampFeatures& features);
SessionOutput predict_session(const Estimator& est, const SessionalFeatures& features);

// Batched prediction over matrix rows.
std::vector<double> predict_timestamp_rows(const Estimator& est, const FeatureMatrix& data,
                                           std::span<const std::size_t> rows);
std::vector<SessionOutput> predict_session_rows(const Estimator& est, const FeatureMatrix& data,
                                                std::span<const std::size_t> rows);

// Versioned JSON checkpoint; reloading reproduces predictions bit-exactly.
std::string serialize_estimator(const Estimator& est);
Estimator parse_estimator(std::string_view json_text);

}  // namespace readest
