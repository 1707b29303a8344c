#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvqkd/channel.hpp"

namespace cvqkd {

enum class Activation { Tanh, Relu, Sigmoid };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation activation);

struct MLPArchitecture {
  std::vector<int> layer_sizes;          // starts at 29, ends at 1
  std::vector<Activation> activations;   // one per hidden layer
  std::vector<double> dropout_rates;     // one per hidden layer, in [0, 0.3]

  int hidden_layers() const { return int(activations.size()); }
  void validate() const;
};

/// Loss shape parameters: gamma trades security pressure against accuracy,
/// epsilon caps the rewarded overestimation margin via −log₁₀(epsilon).
struct LossHyper {
  double gamma = 0.1;
  double epsilon = 0.9;

  void validate() const;
};

/// Z-score standardization fit on the training split only. Labels are
/// always transformed as y* = −log₁₀(y).
struct Preprocessor {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  bool had_constant_feature = false;  // constant columns get std 1

  static Preprocessor fit(const Eigen::MatrixXd& features);  // rows = samples
  Eigen::MatrixXd transform(const Eigen::MatrixXd& features) const;
  Eigen::VectorXd transform_one(const Eigen::VectorXd& features) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& standardized) const;
};

inline double to_log_label(double y) { return -std::log10(y); }
inline double from_log_label(double ystar) { return std::pow(10.0, -ystar); }

struct TrainConfig {
  int batch_size = 64;
  int epochs = 200;
  double learning_rate = 1e-3;
  double validation_fraction = 0.10;
  std::uint64_t seed = 0;
};

struct Network {
  MLPArchitecture arch;
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out × in)
  std::vector<Eigen::VectorXd> biases;
};

/// Glorot-style symmetric uniform init, deterministic in the seed.
Network init_network(const MLPArchitecture& arch, std::uint64_t seed);

/// Inference-mode forward pass (dropout off).
double forward(const Network& net, const Eigen::VectorXd& x);
Eigen::VectorXd forward_batch(const Network& net, const Eigen::MatrixXd& x_rows);

struct SecureLoss {
  double value;
  Eigen::VectorXd grad;  // d value / d predictions
};

/// L = (1/n) Σ γ(e*² + max(e*, −log₁₀ε)) − (1−γ)·min(e*, 0), e* = pred − label.
/// Subgradients at the two kinks take the left branch.
SecureLoss secure_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels,
                       const LossHyper& hyper);

struct TrainedModel {
  Network net;
  Preprocessor preproc;
  LossHyper hyper;
  std::uint64_t seed = 0;

  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);
};

struct TrainResult {
  TrainedModel model;  // parameters of the best validation epoch
  double best_validation_loss = 0;
  std::vector<double> validation_history;
  double first_epoch_training_loss = 0;
  double final_training_loss = 0;
};

/// Minibatch Adam on the security-biased loss; raw labels must be positive.
TrainResult train(const Network& net, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& labels, const Preprocessor& preproc,
                  const LossHyper& hyper, const TrainConfig& config);

double predict_key_rate(const TrainedModel& model, const FeatureVector& features);
Eigen::VectorXd predict_key_rate_batch(const TrainedModel& model,
                                       const Eigen::MatrixXd& features);

struct EvaluationSummary {
  double secure_fraction = 0;
  double secure_within_20 = 0;  // among secure: relative deviation in [−0.2, 0]
  double secure_within_40 = 0;  // among secure: relative deviation in [−0.4, 0]
  std::vector<double> histogram;      // 5% bins over [−1, 1)
  std::vector<double> bin_edges;      // histogram edges, size histogram.size()+1
  int count = 0;
  int secure_count = 0;
};

EvaluationSummary evaluate_model(const TrainedModel& model, const Eigen::MatrixXd& features,
                                 const Eigen::VectorXd& labels);

}  // namespace cvqkd
