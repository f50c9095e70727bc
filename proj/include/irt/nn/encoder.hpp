#pragma once

// Feed-forward encoder from a response vector to trait estimates, trained by
// regression on decoder posterior-mean traits.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irt/errors.hpp"
#include "irt/grm/response_matrix.hpp"

namespace irt::nn {

/// One-hot block per item (J_i entries, all zero when missing) followed by
/// one missing flag per item. Length sum(J_i) + I.
Eigen::VectorXd encode_features(std::span<const int> responses, const Eigen::VectorXi& categories);
Eigen::MatrixXd encode_features(const ResponseMatrix& data);  // persons x width
int feature_width(const Eigen::VectorXi& categories);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// tanh on hidden layers, identity on the output layer.
class EncoderNet {
 public:
  EncoderNet() = default;
  /// Glorot-uniform weights and zero biases for the given layer widths
  /// (input first, output last).
  EncoderNet(const std::vector<int>& sizes, std::mt19937_64& rng);
  explicit EncoderNet(std::vector<DenseLayer> layers);

  int input_width() const;
  int output_dims() const;
  std::vector<int> sizes() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::Index parameter_count() const;
  /// Per layer: weights row-major, then biases.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& features) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& features) const;  // rows are inputs

  /// Item category counts of the feature layout (empty for raw-feature nets).
  Eigen::VectorXi categories;
  /// Content hash of the decoder fit the targets came from.
  std::string decoder_hash;

 private:
  void validate() const;
  std::vector<DenseLayer> layers_;
};

/// Mean over rows and output dimensions of the squared error.
double mse_loss(const EncoderNet& net, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets);
/// Gradient of mse_loss with respect to net.parameters(), by reverse-mode differentiation.
Eigen::VectorXd mse_gradient(const EncoderNet& net, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                             double* loss = nullptr);

struct EncoderConfig {
  std::vector<int> hidden;  // empty = two layers of width 2 I
  int max_epochs = 500;
  int batch_size = 32;
  double step_size = 3e-3;
  int patience = 20;
  double validation_fraction = 0.2;

  void validate() const;
};

struct EpochRow {
  int epoch;
  double train_mse;
  double validation_mse;
};

struct TrainingReport {
  std::vector<EpochRow> epochs;
  int best_epoch = 0;  // 0 = the initial weights
  double best_validation_mse = 0.0;
  double validation_target_variance = 0.0;  // mean per-dimension variance of validation targets
  std::vector<int> validation_rows;
  bool stopped_early = false;
};

struct TrainedEncoder {
  EncoderNet net;
  TrainingReport report;
};

class EncoderDivergenceError : public NumericalError {
 public:
  EncoderDivergenceError(const std::string& what, EncoderNet best)
      : NumericalError(what), best_(std::move(best)) {}
  const EncoderNet& best() const { return best_; }

 private:
  EncoderNet best_;
};

/// Adam on the training MSE over shuffled minibatches; keeps the weights with
/// the lowest validation MSE and stops after `patience` epochs without improvement.
TrainedEncoder train_encoder(const ResponseMatrix& data, const Eigen::MatrixXd& targets,
                             const EncoderConfig& config, std::mt19937_64& rng);

/// Same, on precomputed features, with an explicit validation subset.
TrainedEncoder train_on_features(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                                 EncoderNet init, const std::vector<int>& validation_rows,
                                 const EncoderConfig& config, std::mt19937_64& rng);

Eigen::VectorXd score(const EncoderNet& net, std::span<const int> responses);
Eigen::MatrixXd score(const EncoderNet& net, const ResponseMatrix& data);

}  // namespace irt::nn
