#include "irt/advi/fit.hpp"

#include <cmath>
#include <numeric>

#include "irt/fa/factor_analysis.hpp"

namespace irt {

void FitConfig::validate() const {
  if (dims < 1) throw ContractError("dimension count must be at least 1");
  if (mc_samples < 1) throw ContractError("Monte Carlo sample count must be at least 1");
  if (max_iterations < 0) throw ContractError("iteration budget must be nonnegative");
  if (window < 1) throw ContractError("convergence window must be at least 1");
  if (!(tolerance >= 0.0)) throw ContractError("convergence tolerance must be nonnegative");
  if (threads < 1) throw ContractError("thread count must be at least 1");
  schedule.validate();
  (void)prior();
}

ModelParams<double> initial_params(const ResponseMatrix& data, int dims,
                                   const std::optional<Eigen::MatrixXd>& loadings) {
  ModelParams<double> params = make_params(ModelShape::of(data, dims));
  if (loadings) {
    if (loadings->rows() != data.items() || loadings->cols() != dims) {
      throw ContractError("loading matrix must be items x dimensions");
    }
    params.item.discrimination = fa::init_from_loadings(*loadings);
  }
  for (int i = 0; i < data.items(); ++i) {
    const int J = data.categories(i);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(J);
    for (int p = 0; p < data.persons(); ++p) {
      if (!data.missing(p, i)) counts[data.code(p, i) - 1] += 1.0;
    }
    const double n = counts.sum();
    Eigen::VectorXd tau(J - 1);
    double cumulative = 0.0;
    for (int k = 0; k < J - 1; ++k) {
      cumulative += counts[k];
      const double prop = (cumulative + 0.5) / (n + 1.0);
      tau[k] = std::log(prop / (1.0 - prop));
      if (k > 0) tau[k] = std::max(tau[k], tau[k - 1] + 0.05);
    }
    Eigen::MatrixXd& m = params.item.thresholds[static_cast<std::size_t>(i)];
    m = tau.replicate(1, dims);
    params.item.location.row(i).setConstant(tau[0]);
  }
  return params;
}

VariationalPosterior initial_posterior(const ResponseMatrix& data, const FitConfig& config,
                                       const ModelParams<double>& init) {
  check_invariants(init);
  const TransformSpec transform = TransformSpec::build(ModelShape::of(data, config.dims));
  return make_posterior(transform, transform.unconstrain(init), config.initial_log_scale);
}

namespace {

double window_mean(const std::vector<TraceRow>& trace, std::size_t begin, std::size_t end) {
  double total = 0.0;
  for (std::size_t k = begin; k < end; ++k) total += trace[k].elbo;
  return total / static_cast<double>(end - begin);
}

}  // namespace

FitResult optimize(const VariationalPosterior& start, const LogDensity& target, const FitConfig& config) {
  config.validate();
  start.validate();
  if (target.dimension() != start.size()) {
    throw ContractError("surrogate and target dimensions differ");
  }
  FitResult result{start, {}, false};
  VariationalPosterior& q = result.posterior;
  std::mt19937_64 rng(config.seed);
  const Eigen::Index n = q.size();
  Adam adam(2 * n);
  Eigen::VectorXd packed(2 * n);
  Eigen::VectorXd grad(2 * n);
  const auto window = static_cast<std::size_t>(config.window);

  for (long t = 0; t < config.max_iterations; ++t) {
    ElboGradient g;
    try {
      g = elbo_gradient(q, target, config.mc_samples, rng, config.threads);
    } catch (const NumericalError& e) {
      throw DivergenceError(std::string("ELBO diverged at iteration ") + std::to_string(t) + ": " + e.what(), q);
    }
    const double step = config.schedule.at(t);
    result.trace.push_back({t, g.elbo, step});

    VariationalPosterior previous = q;
    packed << q.location, q.log_scale;
    grad << -g.location, -g.log_scale;
    adam.descend(packed, grad, step);
    if (!packed.allFinite()) {
      throw DivergenceError("surrogate parameters became non-finite at iteration " + std::to_string(t),
                            previous);
    }
    q.location = packed.head(n);
    q.log_scale = packed.tail(n);

    const std::size_t done = result.trace.size();
    if (config.tolerance > 0.0 && done % window == 0 && done >= 2 * window) {
      const double current = window_mean(result.trace, done - window, done);
      const double before = window_mean(result.trace, done - 2 * window, done - window);
      if ((current - before) / std::abs(before) < config.tolerance) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

FitResult fit(const ResponseMatrix& data, const FitConfig& config, const ModelParams<double>& init) {
  config.validate();
  const VariationalPosterior start = initial_posterior(data, config, init);
  const GrmLogDensity target(data, config.prior(), start.transform);
  return optimize(start, target, config);
}

FitResult fit(const ResponseMatrix& data, const FitConfig& config, const Eigen::MatrixXd& loadings) {
  return fit(data, config, initial_params(data, config.dims, loadings));
}

FitResult fit(const ResponseMatrix& data, const FitConfig& config) {
  std::optional<Eigen::MatrixXd> loadings;
  if (config.dims < data.items()) {
    try {
      loadings = fa::exploratory_loadings(data, config.dims).values;
    } catch (const ValidationError&) {
      // unit discriminations
    } catch (const NumericalError&) {
      // unit discriminations
    }
  }
  return fit(data, config, initial_params(data, config.dims, loadings));
}

}  // namespace irt
