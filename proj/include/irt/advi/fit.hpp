#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "irt/advi/adam.hpp"
#include "irt/advi/variational.hpp"

namespace irt {

struct FitConfig {
  int dims = 1;
  double eta0 = 0.01;
  double xi0 = 0.01;
  double kappa_base = 0.01;
  double kappa_ratio = 0.1;
  double nu = 1.0;

  int mc_samples = 8;
  StepSchedule schedule{1e-3, 0.5, 2000.0, 1e-4};
  long max_iterations = 20000;
  int window = 100;
  double tolerance = 1e-4;
  double initial_log_scale = -2.0;
  std::uint64_t seed = 1;
  int threads = 1;

  PriorConfig prior() const {
    return PriorConfig::with_schedule(dims, eta0, xi0, kappa_base, kappa_ratio, nu);
  }
  void validate() const;
};

struct TraceRow {
  long iteration;
  double elbo;
  double step_size;
};

struct FitResult {
  VariationalPosterior posterior;
  std::vector<TraceRow> trace;
  bool converged = false;
};

/// Optimization failed; carries the last surrogate whose ELBO was finite.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, VariationalPosterior last)
      : NumericalError(what), last_(std::move(last)) {}
  const VariationalPosterior& last() const { return last_; }

 private:
  VariationalPosterior last_;
};

/// Starting parameters: discriminations from `loadings` (1 + loading, floored)
/// or 1 without loadings; thresholds at the logits of the empirical cumulative
/// category proportions; locations at the first threshold; traits at 0; unit scales.
ModelParams<double> initial_params(const ResponseMatrix& data, int dims,
                                   const std::optional<Eigen::MatrixXd>& loadings = std::nullopt);

VariationalPosterior initial_posterior(const ResponseMatrix& data, const FitConfig& config,
                                       const ModelParams<double>& init);

/// Adam on -ELBO from `start`, with the schedule, budget and stopping rule in `config`.
FitResult optimize(const VariationalPosterior& start, const LogDensity& target, const FitConfig& config);

FitResult fit(const ResponseMatrix& data, const FitConfig& config, const ModelParams<double>& init);
FitResult fit(const ResponseMatrix& data, const FitConfig& config, const Eigen::MatrixXd& loadings);
/// Seeds from exploratory factor loadings when D >= 2 and the items allow it.
FitResult fit(const ResponseMatrix& data, const FitConfig& config);

}  // namespace irt
