#include <json.hpp>

#include <algorithm>

#include "readest/error.hpp"
#include "readest/estimators.hpp"

namespace readest {
namespace {

using nlohmann::json;

constexpr const char* kCheckpointFormat = "readest-checkpoint/1";

const std::vector<std::string>& columns_of(const std::string& schema) {
  if (schema == kTimestampSchema) return timestamp_columns();
  if (schema == kSessionalSchema) return sessional_columns();
  throw ConfigError("unsupported feature schema '" + schema + "'");
}

json layer_json(const DenseLayer& l) {
  std::vector<double> w;
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
  return {{"activation", to_string(l.activation)},
          {"in", l.weight.cols()},
          {"out", l.weight.rows()},
          {"weight", w},
          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

DenseLayer layer_from(const json& j) {
  DenseLayer l;
  l.activation = activation_from_string(j.at("activation").get<std::string>());
  const auto in = j.at("in").get<Eigen::Index>();
  const auto out = j.at("out").get<Eigen::Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (in <= 0 || out <= 0 || static_cast<Eigen::Index>(w.size()) != in * out ||
      static_cast<Eigen::Index>(b.size()) != out)
    throw ShapeError("checkpoint layer dimensions do not match its weights");
  l.weight.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
  l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
  return l;
}

json dense_json(const DenseNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) layers.push_back(layer_json(l));
  return layers;
}

DenseNet dense_from(const json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& l : j) layers.push_back(layer_from(l));
  return DenseNet(std::move(layers));
}

json standardizer_json(const Standardizer& s, const std::vector<std::string>& cols) {
  std::vector<std::string> names;
  for (auto c : s.columns) names.push_back(cols.at(c));
  return {{"columns", names}, {"mean", s.mean}, {"sd", s.sd}};
}

Standardizer standardizer_from(const json& j, const std::vector<std::string>& cols) {
  Standardizer s;
  for (const auto& name : j.at("columns").get<std::vector<std::string>>()) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw ConfigError("checkpoint references unknown column '" + name + "'");
    s.columns.push_back(static_cast<std::size_t>(it - cols.begin()));
  }
  s.mean = j.at("mean").get<std::vector<double>>();
  s.sd = j.at("sd").get<std::vector<double>>();
  if (s.mean.size() != s.columns.size() || s.sd.size() != s.columns.size())
    throw ShapeError("checkpoint standardizer widths disagree");
  return s;
}

}  // namespace

std::string serialize_estimator(const Estimator& est) {
  const auto& cols = columns_of(est.schema_version);
  json j;
  j["format"] = kCheckpointFormat;
  j["kind"] = to_string(est.kind);
  j["schema_version"] = est.schema_version;
  j["input_a"] = standardizer_json(est.input_a, cols);
  j["input_b"] = standardizer_json(est.input_b, cols);
  const auto& c = est.train_config;
  j["train_config"] = {{"batch_size", c.batch_size},   {"max_epochs", c.max_epochs},
                       {"lr", c.adam.lr},              {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},        {"eps", c.adam.eps},
                       {"positive_weight", c.positive_weight}, {"patience", c.patience},
                       {"seed", c.seed}};
  j["trace"] = {{"train_loss", est.trace.train_loss},
                {"validation_loss", est.trace.validation_loss},
                {"epochs_run", est.trace.epochs_run},
                {"best_epoch", est.trace.best_epoch},
                {"early_stopped", est.trace.early_stopped}};
  if (!est.network) {
    j["network"] = nullptr;
  } else if (const auto* d = std::get_if<DenseNet>(&*est.network)) {
    j["network"] = {{"type", "dense"}, {"layers", dense_json(*d)}};
  } else {
    const auto& t = std::get<TwoTowerNet>(*est.network);
    j["network"] = {{"type", "two-tower"},
                    {"tower_a", dense_json(t.tower_a)},
                    {"tower_b", dense_json(t.tower_b)},
                    {"head", dense_json(t.head)}};
  }
  return j.dump(1) + "\n";
}

Estimator parse_estimator(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("checkpoint is not JSON: ") + e.what());
  }
  try {
    if (j.at("format") != kCheckpointFormat) throw ConfigError("unsupported checkpoint format");
    Estimator est;
    est.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
    est.schema_version = j.at("schema_version").get<std::string>();
    const std::string expected = granularity_of(est.kind) == Granularity::timestamp ? kTimestampSchema
                                                                                      : kSessionalSchema;
    if (est.schema_version != expected)
      throw ConfigError("checkpoint schema '" + est.schema_version + "' does not fit " +
                        std::string(to_string(est.kind)));
    const auto& cols = columns_of(est.schema_version);
    est.input_a = standardizer_from(j.at("input_a"), cols);
    est.input_b = standardizer_from(j.at("input_b"), cols);

    const auto& c = j.at("train_config");
    est.train_config.batch_size = c.at("batch_size").get<std::size_t>();
    est.train_config.max_epochs = c.at("max_epochs").get<int>();
    est.train_config.adam.lr = c.at("lr").get<double>();
    est.train_config.adam.beta1 = c.at("beta1").get<double>();
    est.train_config.adam.beta2 = c.at("beta2").get<double>();
    est.train_config.adam.eps = c.at("eps").get<double>();
    est.train_config.positive_weight = c.at("positive_weight").get<double>();
    est.train_config.patience = c.at("patience").get<int>();
    est.train_config.seed = c.at("seed").get<std::uint64_t>();

    const auto& t = j.at("trace");
    est.trace.train_loss = t.at("train_loss").get<std::vector<double>>();
    est.trace.validation_loss = t.at("validation_loss").get<std::vector<double>>();
    est.trace.epochs_run = t.at("epochs_run").get<int>();
    est.trace.best_epoch = t.at("best_epoch").get<int>();
    est.trace.early_stopped = t.at("early_stopped").get<bool>();

    const auto& n = j.at("network");
    if (is_trainable(est.kind) != !n.is_null())
      throw ConfigError("checkpoint network presence does not match " + std::string(to_string(est.kind)));
    if (!n.is_null()) {
      const auto type = n.at("type").get<std::string>();
      if (type == "dense") {
        est.network = dense_from(n.at("layers"));
      } else if (type == "two-tower") {
        TwoTowerNet net{dense_from(n.at("tower_a")), dense_from(n.at("tower_b")), dense_from(n.at("head"))};
        net.validate();
        est.network = std::move(net);
      } else {
        throw ConfigError("unknown network type '" + type + "'");
      }
      const auto dims = input_dims(*est.network);
      if (dims[0] != est.input_a.width() || (dims.size() > 1 && dims[1] != est.input_b.width()))
        throw ShapeError("checkpoint network inputs do not match its standardizers");
    }
    return est;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace readest
