#include "readest/estimators.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "readest/error.hpp"

namespace readest {
namespace {

constexpr std::array<std::pair<EstimatorKind, std::string_view>, 10> kKindNames{{
    {EstimatorKind::Baseline1, "Baseline1"},
    {EstimatorKind::Baseline2, "Baseline2"},
    {EstimatorKind::Baseline3, "Baseline3"},
    {EstimatorKind::Logistic, "Logistic"},
    {EstimatorKind::BaselineNN, "BaselineNN"},
    {EstimatorKind::PatternBaselineNN, "PatternBaselineNN"},
    {EstimatorKind::NN, "NN"},
    {EstimatorKind::PatternNN, "PatternNN"},
    {EstimatorKind::PatternSessionalNN, "PatternSessionalNN"},
    {EstimatorKind::PatternCategoryNN, "PatternCategoryNN"},
}};

const std::vector<std::string> kMessageUser = {
    "msg_position", "msg_visible", "msg_window_share", "msg_secs_since_click",
    "mouse_x", "mouse_y", "mouse_known", "secs_since_any_click",
};
const std::vector<std::string> kPattern = {
    "move_h_2", "move_h_5", "move_h_10", "move_h_inf", "move_v_2", "move_v_5", "move_v_10",
    "move_v_inf", "scroll_2", "scroll_5", "scroll_10", "scroll_inf", "clicked_fraction",
};
const std::vector<std::string> kBaseline = {"baseline1", "baseline2", "baseline3"};
const std::vector<std::string> kSessionalMessage = {
    "avg_window_share", "avg_position", "clicked", "secs_visible", "time1", "time2", "time3",
};
const std::vector<std::string> kSessionalPattern = {"avg_move_h", "avg_move_v", "avg_scroll", "clicked_fraction"};

constexpr std::size_t kHidden = 32;
constexpr std::size_t kTowerOut = 16;

const std::vector<std::string>& schema_columns(Granularity g) {
  return g == Granularity::timestamp ? timestamp_columns() : sessional_columns();
}

std::vector<std::size_t> column_indices(const std::vector<std::string>& names, Granularity g) {
  const auto& cols = schema_columns(g);
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    const auto it = std::find(cols.begin(), cols.end(), n);
    if (it == cols.end()) throw LookupError("routing names unknown column '" + n + "'");
    out.push_back(static_cast<std::size_t>(it - cols.begin()));
  }
  return out;
}

DenseNet tower(std::size_t inputs, Activation out, std::mt19937_64& rng) {
  const std::array<LayerSpec, 3> spec{{{kHidden, Activation::relu}, {kHidden, Activation::relu}, {kTowerOut, out}}};
  return DenseNet::make(inputs, spec, rng);
}

// Standardized inputs of the routed columns, one column per row.
Batch make_batch(const Estimator& est, std::span<const double> values, std::size_t width,
                 std::span<const std::size_t> rows) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.a.resize(static_cast<Eigen::Index>(est.input_a.width()), n);
  if (est.input_b.width() > 0) b.b.resize(static_cast<Eigen::Index>(est.input_b.width()), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto row = values.subspan(rows[static_cast<std::size_t>(j)] * width, width);
    est.input_a.apply(row, std::span<double>(b.a.col(j).data(), static_cast<std::size_t>(b.a.rows())));
    if (est.input_b.width() > 0)
      est.input_b.apply(row, std::span<double>(b.b.col(j).data(), static_cast<std::size_t>(b.b.rows())));
  }
  return b;
}

void check_schema(const Estimator& est, Granularity g) {
  if (est.granularity() != g)
    throw ConfigError(std::string(to_string(est.kind)) + " is a per-" + std::string(to_string(est.granularity())) +
                      " estimator");
  const std::string expected = g == Granularity::timestamp ? kTimestampSchema : kSessionalSchema;
  if (est.schema_version != expected)
    throw ConfigError("estimator schema '" + est.schema_version + "' does not match '" + expected + "'");
}

double heuristic_p(const Estimator& est, std::span<const double> row) {
  return row[est.input_a.columns.front()];
}

SessionOutput session_output(const Estimator& est, const Eigen::MatrixXd& out, Eigen::Index j) {
  SessionOutput s;
  if (est.kind == EstimatorKind::PatternSessionalNN) {
    s.time = out(0, j);
  } else {
    s.class_probs = std::array<double, 3>{out(0, j), out(1, j), out(2, j)};
  }
  return s;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

EstimatorKind estimator_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames)
    if (name == s) return k;
  throw ConfigError("unknown estimator kind '" + std::string(s) + "'");
}

const std::vector<EstimatorKind>& all_estimator_kinds() {
  static const std::vector<EstimatorKind> kinds = [] {
    std::vector<EstimatorKind> v;
    for (const auto& [k, name] : kKindNames) v.push_back(k);
    return v;
  }();
  return kinds;
}

Granularity granularity_of(EstimatorKind kind) {
  return kind == EstimatorKind::PatternSessionalNN || kind == EstimatorKind::PatternCategoryNN
             ? Granularity::session
             : Granularity::timestamp;
}

bool is_trainable(EstimatorKind kind) {
  return kind != EstimatorKind::Baseline1 && kind != EstimatorKind::Baseline2 && kind != EstimatorKind::Baseline3;
}

LossKind loss_of(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::PatternSessionalNN: return LossKind::absolute_error;
    case EstimatorKind::PatternCategoryNN: return LossKind::cross_entropy;
    default: return LossKind::weighted_bce;
  }
}

InputRouting routing_for(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Baseline1: return {{"baseline1"}, {}};
    case EstimatorKind::Baseline2: return {{"baseline2"}, {}};
    case EstimatorKind::Baseline3: return {{"baseline3"}, {}};
    case EstimatorKind::Logistic:
    case EstimatorKind::NN: return {kMessageUser, {}};
    case EstimatorKind::BaselineNN: return {kBaseline, {}};
    case EstimatorKind::PatternBaselineNN: return {kBaseline, kPattern};
    case EstimatorKind::PatternNN: return {kMessageUser, kPattern};
    case EstimatorKind::PatternSessionalNN:
    case EstimatorKind::PatternCategoryNN: return {kSessionalMessage, kSessionalPattern};
  }
  return {};
}

Network make_network(EstimatorKind kind, std::uint64_t seed) {
  if (!is_trainable(kind)) throw ConfigError(std::string(to_string(kind)) + " has no network");
  std::mt19937_64 rng(seed);
  const auto routing = routing_for(kind);
  const std::size_t in_a = routing.tower_a.size();
  const std::size_t in_b = routing.tower_b.size();
  switch (kind) {
    case EstimatorKind::Logistic: {
      const std::array<LayerSpec, 1> spec{{{1, Activation::sigmoid}}};
      return DenseNet::make(in_a, spec, rng);
    }
    case EstimatorKind::BaselineNN:
    case EstimatorKind::NN: {
      const std::array<LayerSpec, 3> spec{
          {{kHidden, Activation::relu}, {kHidden, Activation::relu}, {1, Activation::sigmoid}}};
      return DenseNet::make(in_a, spec, rng);
    }
    default: {
      // Tower B ends in a sigmoid so the pattern tower gates tower A's units.
      TwoTowerNet net;
      net.tower_a = tower(in_a, Activation::identity, rng);
      net.tower_b = tower(in_b, Activation::sigmoid, rng);
      const Activation head_act = kind == EstimatorKind::PatternSessionalNN  ? Activation::relu
                                  : kind == EstimatorKind::PatternCategoryNN ? Activation::softmax
                                                                             : Activation::sigmoid;
      const std::size_t head_out = kind == EstimatorKind::PatternCategoryNN ? 3 : 1;
      const std::array<LayerSpec, 1> head{{{head_out, head_act}}};
      net.head = DenseNet::make(kTowerOut, head, rng);
      return net;
    }
  }
}

Estimator build_estimator(EstimatorKind kind, const FeatureMatrix& data, std::span<const std::size_t> train_rows,
                          std::span<const std::size_t> validation_rows, const TrainConfig& config) {
  const Granularity g = granularity_of(kind);
  if (data.granularity != g)
    throw ConfigError(std::string(to_string(kind)) + " needs per-" + std::string(to_string(g)) + " data, got per-" +
                      std::string(to_string(data.granularity)));
  const std::string expected = g == Granularity::timestamp ? kTimestampSchema : kSessionalSchema;
  if (data.schema_version != expected) throw ConfigError("feature schema '" + data.schema_version + "' unsupported");

  Estimator est;
  est.kind = kind;
  est.schema_version = data.schema_version;
  est.train_config = config;
  const auto routing = routing_for(kind);

  if (!is_trainable(kind)) {
    // Heuristics read their baseline column untouched.
    est.input_a.columns = column_indices(routing.tower_a, g);
    est.input_a.mean.assign(1, 0.0);
    est.input_a.sd.assign(1, 1.0);
    return est;
  }
  if (!data.labeled) throw LabelError("training " + std::string(to_string(kind)) + " needs labeled data");
  {
    std::set<std::size_t> train(train_rows.begin(), train_rows.end());
    for (auto r : validation_rows)
      if (train.count(r)) throw ConfigError("train and validation rows overlap");
  }

  est.input_a = Standardizer::fit(data, train_rows, column_indices(routing.tower_a, g));
  if (!routing.tower_b.empty()) est.input_b = Standardizer::fit(data, train_rows, column_indices(routing.tower_b, g));

  auto labels_for = [&](std::span<const std::size_t> rows) {
    std::vector<double> y;
    y.reserve(rows.size());
    for (auto r : rows) {
      switch (loss_of(kind)) {
        case LossKind::weighted_bce: y.push_back(data.gaze[r]); break;
        case LossKind::absolute_error: y.push_back(data.true_time[r]); break;
        case LossKind::cross_entropy: y.push_back(data.true_class[r]); break;
      }
    }
    return y;
  };
  TrainingSet train_set{make_batch(est, data.values, data.cols(), train_rows), labels_for(train_rows)};
  TrainingSet val_set{make_batch(est, data.values, data.cols(), validation_rows), labels_for(validation_rows)};

  auto result = train(make_network(kind, config.seed), train_set, val_set, loss_of(kind), config);
  est.network = std::move(result.model);
  est.trace = std::move(result.trace);
  return est;
}

ReadLevel predicted_level(const std::array<double, 3>& probs) {
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (probs[static_cast<std::size_t>(k)] > probs[static_cast<std::size_t>(best)]) best = k;
  return static_cast<ReadLevel>(best);
}

std::vector<double> predict_timestamp_rows(const Estimator& est, const FeatureMatrix& data,
                                           std::span<const std::size_t> rows) {
  check_schema(est, data.granularity);
  if (data.schema_version != est.schema_version) throw ConfigError("feature schema mismatch");
  std::vector<double> out;
  out.reserve(rows.size());
  if (!est.network) {
    for (auto r : rows) out.push_back(heuristic_p(est, data.row(r)));
    return out;
  }
  const Eigen::MatrixXd y = predict(*est.network, make_batch(est, data.values, data.cols(), rows));
  for (Eigen::Index j = 0; j < y.cols(); ++j) out.push_back(y(0, j));
  return out;
}

std::vector<SessionOutput> predict_session_rows(const Estimator& est, const FeatureMatrix& data,
                                                std::span<const std::size_t> rows) {
  check_schema(est, data.granularity);
  if (data.schema_version != est.schema_version) throw ConfigError("feature schema mismatch");
  const Eigen::MatrixXd y = predict(*est.network, make_batch(est, data.values, data.cols(), rows));
  std::vector<SessionOutput> out;
  out.reserve(rows.size());
  for (Eigen::Index j = 0; j < y.cols(); ++j) out.push_back(session_output(est, y, j));
  return out;
}

TimestampPrediction predict_timestamp(const Estimator& est, const TimestampFeatures& features) {
  check_schema(est, Granularity::timestamp);
  const std::vector<double> row = features.to_row();
  TimestampPrediction p{features.msg_id, features.t, 0.0};
  if (!est.network) {
    p.p = heuristic_p(est, row);
  } else {
    const std::size_t zero = 0;
    p.p = predict(*est.network, make_batch(est, row, row.size(), std::span(&zero, 1)))(0, 0);
  }
  return p;
}

SessionOutput predict_session(const Estimator& est, const SessionalFeatures& features) {
  check_schema(est, Granularity::session);
  const std::vector<double> row = features.to_row();
  const std::size_t zero = 0;
  const Eigen::MatrixXd y = predict(*est.network, make_batch(est, row, row.size(), std::span(&zero, 1)));
  return session_output(est, y, 0);
}

}  // namespace readest
