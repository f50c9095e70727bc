#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "irt/advi/transforms.hpp"
#include "irt/grm/model.hpp"

namespace irt {

/// Log density on the unconstrained space, log-Jacobian included.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual Eigen::Index dimension() const = 0;
  virtual double value(std::span<const double> u) const = 0;
  /// Writes the gradient into `grad` and returns the value.
  virtual double gradient(std::span<const double> u, Eigen::Ref<Eigen::VectorXd> grad) const = 0;
};

/// Joint log density of the horseshoe GRM pulled back through `transform`.
/// Gradients are taken by reverse-mode differentiation on a per-thread tape.
class GrmLogDensity final : public LogDensity {
 public:
  GrmLogDensity(const ResponseMatrix& data, PriorConfig prior, TransformSpec transform);

  Eigen::Index dimension() const override { return transform_.size(); }
  double value(std::span<const double> u) const override;
  double gradient(std::span<const double> u, Eigen::Ref<Eigen::VectorXd> grad) const override;

  const TransformSpec& transform() const { return transform_; }
  const PriorConfig& prior() const { return prior_; }

 private:
  const ResponseMatrix& data_;
  PriorConfig prior_;
  TransformSpec transform_;
};

/// Mean-field Gaussian over the unconstrained coordinates.
struct VariationalPosterior {
  Eigen::VectorXd location;
  Eigen::VectorXd log_scale;
  TransformSpec transform;

  Eigen::Index size() const { return location.size(); }
  Eigen::VectorXd scale() const { return log_scale.array().exp(); }
  /// Entropy of the diagonal Gaussian: sum(log_scale) + n/2 (1 + log 2 pi).
  double entropy() const;
  void validate() const;
};

VariationalPosterior make_posterior(const TransformSpec& transform, const Eigen::VectorXd& location,
                                    double log_scale);

struct ElboGradient {
  double elbo = 0.0;
  Eigen::VectorXd location;
  Eigen::VectorXd log_scale;
};

/// Standard normal draws, one column per Monte Carlo sample.
Eigen::MatrixXd draw_noise(Eigen::Index dimension, int n_mc, std::mt19937_64& rng);

/// Reparameterized ELBO estimate with caller-supplied noise (common random numbers).
double elbo_estimate(const VariationalPosterior& q, const LogDensity& target, const Eigen::MatrixXd& noise);

/// Reparameterized ELBO estimate. Draws with a non-finite density are redrawn
/// up to 10 times before NumericalError is thrown.
double elbo_estimate(const VariationalPosterior& q, const LogDensity& target, int n_mc,
                     std::mt19937_64& rng);

/// Gradient of elbo_estimate(q, target, noise) with respect to location and log-scale.
ElboGradient elbo_gradient(const VariationalPosterior& q, const LogDensity& target,
                           const Eigen::MatrixXd& noise, int threads = 1);

ElboGradient elbo_gradient(const VariationalPosterior& q, const LogDensity& target, int n_mc,
                           std::mt19937_64& rng, int threads = 1);

double elbo_estimate(const VariationalPosterior& q, const ResponseMatrix& data, const PriorConfig& prior,
                     int n_mc, std::mt19937_64& rng);
ElboGradient elbo_gradient(const VariationalPosterior& q, const ResponseMatrix& data,
                           const PriorConfig& prior, int n_mc, std::mt19937_64& rng, int threads = 1);

/// S joint samples on the constrained scale.
using PosteriorDraws = std::vector<ModelParams<double>>;

PosteriorDraws sample_posterior(const VariationalPosterior& q, int draws, std::mt19937_64& rng);

/// Surrogate means on the constrained scale (log-normal means for positive blocks).
ModelParams<double> posterior_mean(const VariationalPosterior& q);

/// Monte Carlo average of the domain weights w_id over the draws (I x D).
Eigen::MatrixXd expected_domain_weights(const PosteriorDraws& draws, double nu);

}  // namespace irt
