#include "readest/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "readest/error.hpp"

namespace readest {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

MatrixXd activate(const MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::identity: return z;
    case Activation::softmax: {
      MatrixXd out(z.rows(), z.cols());
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double m = z.col(j).maxCoeff();
        out.col(j) = (z.col(j).array() - m).exp();
        out.col(j) /= out.col(j).sum();
      }
      return out;
    }
  }
  return z;
}

// dL/dz from dL/da for one layer.
MatrixXd activation_backward(const MatrixXd& da, const MatrixXd& z, const MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::relu: return da.cwiseProduct((z.array() > 0).cast<double>().matrix());
    case Activation::sigmoid: return da.cwiseProduct(a.cwiseProduct((1.0 - a.array()).matrix()));
    case Activation::identity: return da;
    case Activation::softmax: {
      MatrixXd dz(da.rows(), da.cols());
      for (Eigen::Index j = 0; j < da.cols(); ++j) {
        const double dot = a.col(j).dot(da.col(j));
        dz.col(j) = a.col(j).cwiseProduct((da.col(j).array() - dot).matrix());
      }
      return dz;
    }
  }
  return da;
}

MatrixXd forward_dense(const DenseNet& net, const MatrixXd& x, DenseCache& cache) {
  if (net.layers().empty()) throw ShapeError("network has no layers");
  if (static_cast<std::size_t>(x.rows()) != net.input_dim())
    throw ShapeError("input has " + std::to_string(x.rows()) + " features, network expects " +
                     std::to_string(net.input_dim()));
  const auto& layers = net.layers();
  cache.inputs.resize(layers.size());
  cache.pre.resize(layers.size());
  cache.post.resize(layers.size());
  const MatrixXd* in = &x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cache.inputs[l] = *in;
    cache.pre[l].noalias() = layers[l].weight * *in;
    cache.pre[l].colwise() += layers[l].bias;
    cache.post[l] = activate(cache.pre[l], layers[l].activation);
    in = &cache.post[l];
  }
  return cache.post.back();
}

// Fills `grad` for every layer and returns dL/d(input).
MatrixXd backward_dense(const DenseNet& net, const DenseCache& cache, MatrixXd dz, DenseNet& grad) {
  const auto& layers = net.layers();
  auto& g = grad.layers();
  for (std::size_t l = layers.size(); l-- > 0;) {
    g[l].weight.noalias() = dz * cache.inputs[l].transpose();
    g[l].bias = dz.rowwise().sum();
    MatrixXd dx = layers[l].weight.transpose() * dz;
    if (l == 0) return dx;
    dz = activation_backward(dx, cache.pre[l - 1], cache.post[l - 1], layers[l - 1].activation);
  }
  return {};
}

const DenseNet& output_net(const Network& net) {
  return std::holds_alternative<DenseNet>(net) ? std::get<DenseNet>(net) : std::get<TwoTowerNet>(net).head;
}

void check_labels(std::span<const double> labels, LossKind kind, std::size_t classes) {
  for (double y : labels) {
    switch (kind) {
      case LossKind::weighted_bce:
        if (y != 0.0 && y != 1.0) throw LabelError("binary loss needs labels in {0,1}, got " + std::to_string(y));
        break;
      case LossKind::absolute_error:
        if (!std::isfinite(y) || y < 0) throw LabelError("absolute-error loss needs labels >= 0");
        break;
      case LossKind::cross_entropy:
        if (y != std::floor(y) || y < 0 || y >= static_cast<double>(classes))
          throw LabelError("class label " + std::to_string(y) + " out of range");
        break;
    }
  }
}

void check_output(const Network& net, LossKind kind) {
  const Activation act = output_activation(net);
  if (kind == LossKind::weighted_bce && (act != Activation::sigmoid || output_dim(net) != 1))
    throw ConfigError("binary loss needs a single sigmoid output");
  if (kind == LossKind::cross_entropy && act != Activation::softmax)
    throw ConfigError("cross-entropy loss needs a softmax output");
}

// Loss value and dL/d(last pre-activation), both averaged over the batch.
double output_loss(const ForwardPass& fp, std::span<const double> labels, LossKind kind, double w,
                   Activation act, MatrixXd* dz) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0;
  if (dz) dz->resize(fp.output.rows(), n);
  switch (kind) {
    case LossKind::weighted_bce:
      for (Eigen::Index j = 0; j < n; ++j) {
        const double z = fp.pre_output(0, j);
        const double y = labels[static_cast<std::size_t>(j)];
        total += w * y * softplus(-z) + (1 - y) * softplus(z);
        if (dz) {
          const double p = fp.output(0, j);
          (*dz)(0, j) = ((1 - y) * p - w * y * (1 - p)) * inv_n;
        }
      }
      break;
    case LossKind::cross_entropy:
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(j)]);
        const auto z = fp.pre_output.col(j);
        const double m = z.maxCoeff();
        total += m + std::log((z.array() - m).exp().sum()) - z(y);
        if (dz) {
          dz->col(j) = fp.output.col(j) * inv_n;
          (*dz)(y, j) -= inv_n;
        }
      }
      break;
    case LossKind::absolute_error: {
      MatrixXd da = MatrixXd::Zero(fp.output.rows(), n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double y = labels[static_cast<std::size_t>(j)];
        for (Eigen::Index r = 0; r < fp.output.rows(); ++r) {
          const double diff = fp.output(r, j) - y;
          total += std::abs(diff);
          da(r, j) = (diff > 0 ? 1.0 : diff < 0 ? -1.0 : 0.0) * inv_n;
        }
      }
      if (dz) *dz = activation_backward(da, fp.pre_output, fp.output, act);
      break;
    }
  }
  return total * inv_n;
}

void for_each_layer(Network& net, const auto& fn) {
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DenseNet>) {
          for (auto& l : n.layers()) fn(l);
        } else {
          for (auto* part : {&n.tower_a, &n.tower_b, &n.head})
            for (auto& l : part->layers()) fn(l);
        }
      },
      net);
}

void for_each_layer(const Network& net, const auto& fn) {
  for_each_layer(const_cast<Network&>(net), [&](const DenseLayer& l) { fn(l); });
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::weighted_bce: return "weighted-bce";
    case LossKind::absolute_error: return "absolute-error";
    case LossKind::cross_entropy: return "cross-entropy";
  }
  return "?";
}

Activation activation_from_string(std::string_view s) {
  for (auto a : {Activation::relu, Activation::sigmoid, Activation::softmax, Activation::identity})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

LossKind loss_from_string(std::string_view s) {
  for (auto k : {LossKind::weighted_bce, LossKind::absolute_error, LossKind::cross_entropy})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown loss '" + std::string(s) + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) throw ShapeError("bias length differs from layer width");
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
      throw ShapeError("layer " + std::to_string(l) + " input width does not match previous layer");
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) throw NumericError("non-finite parameter");
  }
}

DenseNet DenseNet::make(std::size_t input_dim, std::span<const LayerSpec> spec, std::mt19937_64& rng) {
  std::vector<DenseLayer> layers;
  std::size_t fan_in = input_dim;
  for (const auto& s : spec) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + s.width));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weight.resize(static_cast<Eigen::Index>(s.width), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = dist(rng);
    layer.bias = VectorXd::Zero(static_cast<Eigen::Index>(s.width));
    layer.activation = s.activation;
    layers.push_back(std::move(layer));
    fan_in = s.width;
  }
  return DenseNet(std::move(layers));
}

std::size_t DenseNet::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t DenseNet::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::size_t TwoTowerNet::parameter_count() const {
  return tower_a.parameter_count() + tower_b.parameter_count() + head.parameter_count();
}

void TwoTowerNet::validate() const {
  if (tower_a.output_dim() != tower_b.output_dim())
    throw ShapeError("tower output widths differ: " + std::to_string(tower_a.output_dim()) + " vs " +
                     std::to_string(tower_b.output_dim()));
  if (head.input_dim() != tower_a.output_dim()) throw ShapeError("head input width differs from tower width");
}

std::size_t parameter_count(const Network& net) {
  return std::visit([](const auto& n) { return n.parameter_count(); }, net);
}

bool is_two_tower(const Network& net) { return std::holds_alternative<TwoTowerNet>(net); }

std::vector<std::size_t> input_dims(const Network& net) {
  if (const auto* d = std::get_if<DenseNet>(&net)) return {d->input_dim()};
  const auto& t = std::get<TwoTowerNet>(net);
  return {t.tower_a.input_dim(), t.tower_b.input_dim()};
}

std::size_t output_dim(const Network& net) { return output_net(net).output_dim(); }

Activation output_activation(const Network& net) { return output_net(net).layers().back().activation; }

ForwardPass forward(const Network& net, const Batch& batch) {
  ForwardPass fp;
  if (const auto* d = std::get_if<DenseNet>(&net)) {
    fp.output = forward_dense(*d, batch.a, fp.a);
    fp.pre_output = fp.a.pre.back();
  } else {
    const auto& t = std::get<TwoTowerNet>(net);
    t.validate();
    if (batch.b.cols() != batch.a.cols()) throw ShapeError("tower inputs have different batch sizes");
    fp.tower_a_out = forward_dense(t.tower_a, batch.a, fp.a);
    fp.tower_b_out = forward_dense(t.tower_b, batch.b, fp.b);
    const MatrixXd merged = fp.tower_a_out.cwiseProduct(fp.tower_b_out);
    fp.output = forward_dense(t.head, merged, fp.head);
    fp.pre_output = fp.head.pre.back();
  }
  if (!fp.output.allFinite()) throw NumericError("network produced a non-finite output");
  return fp;
}

MatrixXd predict(const Network& net, const Batch& batch) { return forward(net, batch).output; }

VectorXd merge_multiply(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size())
    throw ShapeError("cannot merge vectors of length " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  return a.cwiseProduct(b);
}

double weighted_bce_term(double p, double y, double positive_weight) {
  double loss = 0;
  if (y != 0) loss -= positive_weight * y * std::log(p);
  if (y != 1) loss -= (1 - y) * std::log1p(-p);
  return loss;
}

double absolute_error_term(double prediction, double y) { return std::abs(prediction - y); }

double cross_entropy_term(const VectorXd& probabilities, int label) {
  if (label < 0 || label >= probabilities.size()) throw LabelError("class label out of range");
  return -std::log(probabilities(label));
}

LossResult loss_and_grad(const Network& net, const Batch& batch, std::span<const double> labels, LossKind kind,
                         double positive_weight) {
  if (labels.size() != batch.size()) throw ShapeError("label count differs from batch size");
  if (labels.empty()) throw ShapeError("empty batch");
  check_output(net, kind);
  check_labels(labels, kind, output_dim(net));

  const ForwardPass fp = forward(net, batch);
  MatrixXd dz;
  LossResult result;
  result.loss = output_loss(fp, labels, kind, positive_weight, output_activation(net), &dz);
  result.grad = net;

  if (const auto* d = std::get_if<DenseNet>(&net)) {
    backward_dense(*d, fp.a, std::move(dz), std::get<DenseNet>(result.grad));
  } else {
    const auto& t = std::get<TwoTowerNet>(net);
    auto& g = std::get<TwoTowerNet>(result.grad);
    const MatrixXd d_merged = backward_dense(t.head, fp.head, std::move(dz), g.head);
    const MatrixXd d_a = d_merged.cwiseProduct(fp.tower_b_out);
    const MatrixXd d_b = d_merged.cwiseProduct(fp.tower_a_out);
    const auto& la = t.tower_a.layers().back();
    const auto& lb = t.tower_b.layers().back();
    backward_dense(t.tower_a, fp.a, activation_backward(d_a, fp.a.pre.back(), fp.a.post.back(), la.activation),
                   g.tower_a);
    backward_dense(t.tower_b, fp.b, activation_backward(d_b, fp.b.pre.back(), fp.b.post.back(), lb.activation),
                   g.tower_b);
  }
  return result;
}

double loss_only(const Network& net, const Batch& batch, std::span<const double> labels, LossKind kind,
                 double positive_weight) {
  if (labels.size() != batch.size()) throw ShapeError("label count differs from batch size");
  if (labels.empty()) throw ShapeError("empty batch");
  check_output(net, kind);
  check_labels(labels, kind, output_dim(net));
  const ForwardPass fp = forward(net, batch);
  return output_loss(fp, labels, kind, positive_weight, output_activation(net), nullptr);
}

Eigen::VectorXd flatten(const Network& net) {
  VectorXd flat(static_cast<Eigen::Index>(parameter_count(net)));
  Eigen::Index pos = 0;
  for_each_layer(net, [&](const DenseLayer& l) {
    flat.segment(pos, l.weight.size()) = Eigen::Map<const VectorXd>(l.weight.data(), l.weight.size());
    pos += l.weight.size();
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  });
  return flat;
}

Network unflatten(const Network& shape, const Eigen::VectorXd& params) {
  if (static_cast<std::size_t>(params.size()) != parameter_count(shape))
    throw ShapeError("parameter vector length does not match the network");
  Network out = shape;
  Eigen::Index pos = 0;
  for_each_layer(out, [&](DenseLayer& l) {
    Eigen::Map<VectorXd>(l.weight.data(), l.weight.size()) = params.segment(pos, l.weight.size());
    pos += l.weight.size();
    l.bias = params.segment(pos, l.bias.size());
    pos += l.bias.size();
  });
  return out;
}

Network adam_step(AdamState& state, const Network& params, const Network& grads) {
  const VectorXd g = flatten(grads);
  if (!g.allFinite()) throw NumericError("non-finite gradient");
  VectorXd theta = flatten(params);
  if (state.m.size() != theta.size()) {
    if (state.step != 0) throw ShapeError("optimizer state does not match parameters");
    state.m = VectorXd::Zero(theta.size());
    state.v = VectorXd::Zero(theta.size());
  }
  const auto& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1 - c.beta1) * g;
  state.v = c.beta2 * state.v + (1 - c.beta2) * g.cwiseProduct(g);
  const double bc1 = 1 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1 - std::pow(c.beta2, static_cast<double>(state.step));
  theta.array() -= c.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.eps);
  if (!theta.allFinite()) throw NumericError("non-finite parameter after update");
  return unflatten(params, theta);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(adam.lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(positive_weight > 0)) throw ConfigError("positive_weight must be positive");
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(double loss) {
  ++epoch_;
  if (best_epoch_ == 0 || loss < best_) {
    best_ = loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

TrainResult train(const Network& init, const TrainingSet& train_set, const TrainingSet& validation_set,
                  LossKind loss, const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("empty training set");
  const bool two_tower = is_two_tower(init);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{init, {}};
  Network params = init;
  AdamState adam{config.adam, 0, {}, {}};
  EarlyStopping stopper(config.patience);

  Batch batch;
  std::vector<double> labels;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      batch.a.resize(train_set.inputs.a.rows(), static_cast<Eigen::Index>(n));
      if (two_tower) batch.b.resize(train_set.inputs.b.rows(), static_cast<Eigen::Index>(n));
      labels.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        const auto src = static_cast<Eigen::Index>(order[start + j]);
        batch.a.col(static_cast<Eigen::Index>(j)) = train_set.inputs.a.col(src);
        if (two_tower) batch.b.col(static_cast<Eigen::Index>(j)) = train_set.inputs.b.col(src);
        labels[j] = train_set.labels[order[start + j]];
      }
      LossResult r = loss_and_grad(params, batch, labels, loss, config.positive_weight);
      epoch_loss += r.loss * static_cast<double>(n);
      params = adam_step(adam, params, r.grad);
    }
    result.trace.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    result.trace.epochs_run = epoch;

    if (validation_set.size() == 0) {
      result.model = params;
      result.trace.best_epoch = epoch;
      continue;
    }
    const double vl =
        loss_only(params, validation_set.inputs, validation_set.labels, loss, config.positive_weight);
    result.trace.validation_loss.push_back(vl);
    if (stopper.update(vl)) {
      result.model = params;
      result.trace.best_epoch = epoch;
    }
    if (stopper.should_stop()) {
      result.trace.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace readest
