#include "irt/nn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "irt/ad/tape.hpp"
#include "irt/advi/adam.hpp"

namespace irt::nn {

int feature_width(const Eigen::VectorXi& categories) {
  return categories.sum() + static_cast<int>(categories.size());
}

Eigen::VectorXd encode_features(std::span<const int> responses, const Eigen::VectorXi& categories) {
  const auto items = static_cast<std::size_t>(categories.size());
  if (responses.size() != items) {
    throw ContractError("response vector has " + std::to_string(responses.size()) + " entries, expected " +
                        std::to_string(items));
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(feature_width(categories));
  const int flags = categories.sum();
  int offset = 0;
  for (std::size_t i = 0; i < items; ++i) {
    const int J = categories[static_cast<Eigen::Index>(i)];
    const int x = responses[i];
    if (x == ResponseMatrix::kMissing) {
      f[flags + static_cast<int>(i)] = 1.0;
    } else if (x >= 1 && x <= J) {
      f[offset + x - 1] = 1.0;
    } else {
      throw ContractError("response " + std::to_string(x) + " of item " + std::to_string(i + 1) +
                          " is outside 1.." + std::to_string(J));
    }
    offset += J;
  }
  return f;
}

Eigen::MatrixXd encode_features(const ResponseMatrix& data) {
  Eigen::MatrixXd out(data.persons(), feature_width(data.categories()));
  std::vector<int> row(static_cast<std::size_t>(data.items()));
  for (int p = 0; p < data.persons(); ++p) {
    for (int i = 0; i < data.items(); ++i) row[static_cast<std::size_t>(i)] = data.code(p, i);
    out.row(p) = encode_features(row, data.categories()).transpose();
  }
  return out;
}

EncoderNet::EncoderNet(const std::vector<int>& sizes, std::mt19937_64& rng) {
  if (sizes.size() < 2) {
    throw ContractError("an encoder needs an input and an output width");
  }
  for (int s : sizes) {
    if (s < 1) throw ContractError("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    layers_.push_back(std::move(layer));
  }
}

EncoderNet::EncoderNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

void EncoderNet::validate() const {
  if (layers_.empty()) throw ContractError("an encoder needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows() || layer.weight.size() == 0) {
      throw ContractError("layer " + std::to_string(l + 1) + " has inconsistent shapes");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw ContractError("layer " + std::to_string(l + 1) + " does not match the previous width");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ContractError("encoder weights must be finite");
    }
  }
}

int EncoderNet::input_width() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }

int EncoderNet::output_dims() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> EncoderNet::sizes() const {
  std::vector<int> s;
  if (layers_.empty()) return s;
  s.push_back(input_width());
  for (const DenseLayer& layer : layers_) s.push_back(static_cast<int>(layer.weight.rows()));
  return s;
}

Eigen::Index EncoderNet::parameter_count() const {
  Eigen::Index n = 0;
  for (const DenseLayer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Eigen::VectorXd EncoderNet::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index k = 0;
  for (const DenseLayer& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat[k++] = layer.weight(r, c);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat[k++] = layer.bias[r];
  }
  return flat;
}

void EncoderNet::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw ContractError("parameter vector length does not match the network");
  }
  Eigen::Index k = 0;
  for (DenseLayer& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = flat[k++];
  }
}

Eigen::VectorXd EncoderNet::forward(const Eigen::Ref<const Eigen::VectorXd>& features) const {
  if (features.size() != input_width()) {
    throw ContractError("feature width " + std::to_string(features.size()) + " does not match encoder input " +
                        std::to_string(input_width()));
  }
  Eigen::VectorXd h = features;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weight * h + layers_[l].bias;
    h = l + 1 < layers_.size() ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return h;
}

Eigen::MatrixXd EncoderNet::forward_batch(const Eigen::MatrixXd& features) const {
  Eigen::MatrixXd out(features.rows(), output_dims());
  for (Eigen::Index r = 0; r < features.rows(); ++r) out.row(r) = forward(features.row(r).transpose()).transpose();
  return out;
}

namespace {

void check_batch(const EncoderNet& net, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
  if (features.rows() != targets.rows() || features.rows() < 1) {
    throw ContractError("features and targets need the same positive number of rows");
  }
  if (features.cols() != net.input_width() || targets.cols() != net.output_dims()) {
    throw ContractError("feature or target width does not match the encoder");
  }
}

double mean_sq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

}  // namespace

double mse_loss(const EncoderNet& net, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
  check_batch(net, features, targets);
  return mean_sq(net.forward_batch(features), targets);
}

Eigen::VectorXd mse_gradient(const EncoderNet& net, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                             double* loss) {
  check_batch(net, features, targets);
  ad::Tape tape;
  const Eigen::VectorXd flat = net.parameters();
  std::vector<ad::Var> w;
  w.reserve(static_cast<std::size_t>(flat.size()));
  for (Eigen::Index k = 0; k < flat.size(); ++k) w.push_back(tape.variable(flat[k]));

  std::vector<ad::Var> squares;
  std::vector<ad::Var> h, next, gathered;
  std::vector<double> active_values;
  std::vector<Eigen::Index> active;
  for (Eigen::Index row = 0; row < features.rows(); ++row) {
    // first layer touches only the nonzero features
    active.clear();
    active_values.clear();
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      if (features(row, c) != 0.0) {
        active.push_back(c);
        active_values.push_back(features(row, c));
      }
    }
    std::size_t offset = 0;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto out = static_cast<std::size_t>(layers[l].weight.rows());
      const auto in = static_cast<std::size_t>(layers[l].weight.cols());
      const std::size_t bias_offset = offset + out * in;
      next.clear();
      for (std::size_t r = 0; r < out; ++r) {
        ad::Var z;
        if (l == 0) {
          gathered.clear();
          for (Eigen::Index c : active) gathered.push_back(w[offset + r * in + static_cast<std::size_t>(c)]);
          z = gathered.empty() ? w[bias_offset + r] : ad::dot(gathered, active_values) + w[bias_offset + r];
        } else {
          z = ad::dot(std::span<const ad::Var>(w).subspan(offset + r * in, in), h) + w[bias_offset + r];
        }
        next.push_back(l + 1 < layers.size() ? ad::tanh(z) : z);
      }
      h.swap(next);
      offset = bias_offset + out;
    }
    for (std::size_t d = 0; d < h.size(); ++d) {
      squares.push_back(ad::square(h[d] - targets(row, static_cast<Eigen::Index>(d))));
    }
  }
  const ad::Var total = ad::sum(squares) / static_cast<double>(squares.size());
  if (loss != nullptr) *loss = total.value();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(flat.size());
  tape.accumulate_gradient(total, 1.0, grad);
  return grad;
}

void EncoderConfig::validate() const {
  for (int h : hidden) {
    if (h < 1) throw ContractError("hidden widths must be positive");
  }
  if (max_epochs < 0) throw ContractError("epoch budget must be nonnegative");
  if (batch_size < 1) throw ContractError("batch size must be at least 1");
  if (!(step_size > 0.0)) throw ContractError("step size must be positive");
  if (patience < 1) throw ContractError("patience must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ContractError("validation fraction must lie in (0, 1)");
  }
}

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

double mean_column_variance(const Eigen::MatrixXd& m) {
  if (m.rows() < 2) return 0.0;
  double total = 0.0;
  for (Eigen::Index d = 0; d < m.cols(); ++d) {
    const double mean = m.col(d).mean();
    total += (m.col(d).array() - mean).square().sum() / static_cast<double>(m.rows() - 1);
  }
  return total / static_cast<double>(m.cols());
}

}  // namespace

TrainedEncoder train_on_features(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, EncoderNet init,
                                 const std::vector<int>& validation_rows, const EncoderConfig& config,
                                 std::mt19937_64& rng) {
  config.validate();
  check_batch(init, features, targets);
  if (!targets.allFinite()) throw ContractError("scoring targets must be finite");
  std::vector<char> is_validation(static_cast<std::size_t>(features.rows()), 0);
  for (int r : validation_rows) {
    if (r < 0 || r >= features.rows()) throw ContractError("validation row out of range");
    is_validation[static_cast<std::size_t>(r)] = 1;
  }
  std::vector<int> train_rows;
  for (int r = 0; r < features.rows(); ++r) {
    if (!is_validation[static_cast<std::size_t>(r)]) train_rows.push_back(r);
  }
  if (train_rows.empty() || validation_rows.empty()) {
    throw ContractError("training and validation sets must both be nonempty");
  }
  const Eigen::MatrixXd train_x = rows_of(features, train_rows), train_y = rows_of(targets, train_rows);
  const Eigen::MatrixXd val_x = rows_of(features, validation_rows), val_y = rows_of(targets, validation_rows);

  TrainedEncoder result{init, {}};
  TrainingReport& report = result.report;
  report.validation_rows = validation_rows;
  report.validation_target_variance = mean_column_variance(val_y);
  report.best_validation_mse = mse_loss(init, val_x, val_y);

  EncoderNet net = std::move(init);
  Eigen::VectorXd params = net.parameters();
  Adam adam(params.size());
  std::vector<int> order(train_rows.size());
  std::iota(order.begin(), order.end(), 0);
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      double loss = 0.0;
      const Eigen::VectorXd grad = mse_gradient(net, rows_of(train_x, batch), rows_of(train_y, batch), &loss);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw EncoderDivergenceError("encoder loss diverged in epoch " + std::to_string(epoch), result.net);
      }
      adam.descend(params, grad, config.step_size);
      net.set_parameters(params);
    }
    const double train_mse = mse_loss(net, train_x, train_y);
    const double val_mse = mse_loss(net, val_x, val_y);
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
      throw EncoderDivergenceError("encoder loss diverged in epoch " + std::to_string(epoch), result.net);
    }
    report.epochs.push_back({epoch, train_mse, val_mse});
    if (val_mse < report.best_validation_mse) {
      report.best_validation_mse = val_mse;
      report.best_epoch = epoch;
      result.net = net;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stopped_early = true;
      break;
    }
  }
  return result;
}

TrainedEncoder train_encoder(const ResponseMatrix& data, const Eigen::MatrixXd& targets, const EncoderConfig& config,
                             std::mt19937_64& rng) {
  config.validate();
  if (targets.rows() != data.persons() || targets.cols() < 1) {
    throw ContractError("one target row per person is required");
  }
  if (data.persons() < 2) throw ContractError("at least 2 persons are required for a validation split");
  const Eigen::MatrixXd features = encode_features(data);
  std::vector<int> sizes{feature_width(data.categories())};
  if (config.hidden.empty()) {
    sizes.push_back(2 * data.items());
    sizes.push_back(2 * data.items());
  } else {
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  }
  sizes.push_back(static_cast<int>(targets.cols()));
  EncoderNet init(sizes, rng);
  init.categories = data.categories();

  std::vector<int> rows(static_cast<std::size_t>(data.persons()));
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config.validation_fraction * data.persons())), 1, rows.size() - 1);
  std::vector<int> validation(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(validation.begin(), validation.end());
  return train_on_features(features, targets, std::move(init), validation, config, rng);
}

Eigen::VectorXd score(const EncoderNet& net, std::span<const int> responses) {
  if (net.categories.size() == 0) throw ContractError("encoder has no feature layout");
  const Eigen::VectorXd f = encode_features(responses, net.categories);
  return net.forward(f);
}

Eigen::MatrixXd score(const EncoderNet& net, const ResponseMatrix& data) {
  if (net.categories.size() == 0) throw ContractError("encoder has no feature layout");
  if (net.categories != data.categories()) {
    throw ContractError("response layout does not match the encoder's item categories");
  }
  return net.forward_batch(encode_features(data));
}

}  // namespace irt::nn
