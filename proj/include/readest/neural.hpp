#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace readest {

enum class Activation { relu, sigmoid, softmax, identity };
enum class LossKind { weighted_bce, absolute_error, cross_entropy };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind k);
Activation activation_from_string(std::string_view s);
LossKind loss_from_string(std::string_view s);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.activation == b.activation && a.weight == b.weight && a.bias == b.bias;
  }
};

struct LayerSpec {
  std::size_t width;
  Activation activation;
};

// A stack of fully connected layers. Samples are columns: a batch of n
// inputs is an (input_dim x n) matrix.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  // Glorot-uniform weights, zero biases.
  static DenseNet make(std::size_t input_dim, std::span<const LayerSpec> spec, std::mt19937_64& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Two towers whose outputs are multiplied elementwise and fed to a head.
struct TwoTowerNet {
  DenseNet tower_a;
  DenseNet tower_b;
  DenseNet head;

  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const TwoTowerNet&, const TwoTowerNet&) = default;
};

using Network = std::variant<DenseNet, TwoTowerNet>;

std::size_t parameter_count(const Network& net);
bool is_two_tower(const Network& net);
// Width of each network input (one entry for single-tower nets).
std::vector<std::size_t> input_dims(const Network& net);
std::size_t output_dim(const Network& net);
Activation output_activation(const Network& net);

// Inputs for one batch; `b` is only used by two-tower networks.
struct Batch {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  std::size_t size() const { return static_cast<std::size_t>(a.cols()); }
};

struct DenseCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activations
  std::vector<Eigen::MatrixXd> post;    // activations
};

struct ForwardPass {
  Eigen::MatrixXd output;      // output_dim x n
  Eigen::MatrixXd pre_output;  // last layer pre-activation
  DenseCache a, b, head;       // a only for single-tower nets
  Eigen::MatrixXd tower_a_out, tower_b_out;
};

// Throws ShapeError on dimension mismatch and NumericError on non-finite output.
ForwardPass forward(const Network& net, const Batch& batch);
Eigen::MatrixXd predict(const Network& net, const Batch& batch);

Eigen::VectorXd merge_multiply(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Single-term losses, exposed for inspection and tests.
double weighted_bce_term(double p, double y, double positive_weight);
double absolute_error_term(double prediction, double y);
double cross_entropy_term(const Eigen::VectorXd& probabilities, int label);

struct LossResult {
  double loss = 0;
  Network grad;  // same shapes as the network
};

// Mean loss over the batch and its gradient w.r.t. every parameter.
//   weighted_bce: labels in {0,1}, sigmoid output, positive terms x positive_weight
//   absolute_error: labels >= 0, |prediction - y| with subgradient 0 at equality
//   cross_entropy: labels are class indices, softmax output
// Throws LabelError on labels invalid for the loss kind.
LossResult loss_and_grad(const Network& net, const Batch& batch, std::span<const double> labels, LossKind kind,
                         double positive_weight = 1.0);
double loss_only(const Network& net, const Batch& batch, std::span<const double> labels, LossKind kind,
                 double positive_weight = 1.0);

// Flat parameter view in a fixed order (towers a, b, head; per layer W then b).
Eigen::VectorXd flatten(const Network& net);
Network unflatten(const Network& shape, const Eigen::VectorXd& params);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  Eigen::VectorXd m, v;
};

// One Adam update with bias correction. Throws NumericError on a non-finite
// gradient.
Network adam_step(AdamState& state, const Network& params, const Network& grads);

struct TrainConfig {
  std::size_t batch_size = 64;
  int max_epochs = 50;
  AdamConfig adam;
  double positive_weight = 20;
  int patience = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

// Stops once the monitored loss has not improved on its best value for
// `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Records the epoch's loss; returns true when it is a new best.
  bool update(double loss);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  double best_loss() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_ = 0;
};

// Column-per-sample training data.
struct TrainingSet {
  Batch inputs;
  std::vector<double> labels;
  std::size_t size() const { return labels.size(); }
};

struct TrainTrace {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int epochs_run = 0;
  int best_epoch = 0;
  bool early_stopped = false;
};

struct TrainResult {
  Network model;
  TrainTrace trace;
};

// Mini-batch Adam with a per-epoch seeded shuffle. Returns the parameters of
// the epoch with the best validation loss (the last epoch when the validation
// set is empty). Throws ConfigError on an empty training set.
TrainResult train(const Network& init, const TrainingSet& train_set, const TrainingSet& validation_set,
                  LossKind loss, const TrainConfig& config);

}  // namespace readest
