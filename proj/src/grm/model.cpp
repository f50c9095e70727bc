#include "irt/grm/model.hpp"

#include <algorithm>
#include <limits>

namespace irt {

ModelParams<double> make_params(const ModelShape& shape) {
  if (shape.persons < 0 || shape.items < 1 || shape.dims < 1 ||
      shape.categories.size() != shape.items) {
    throw ContractError("invalid model shape");
  }
  ModelParams<double> params;
  params.item.discrimination = Eigen::MatrixXd::Ones(shape.items, shape.dims);
  params.item.location = Eigen::MatrixXd::Zero(shape.items, shape.dims);
  params.item.thresholds.reserve(static_cast<std::size_t>(shape.items));
  for (int i = 0; i < shape.items; ++i) {
    const int count = shape.categories[i] - 1;
    if (count < 1) {
      throw ContractError("items need at least 2 categories");
    }
    Eigen::VectorXd grid = Eigen::VectorXd::Zero(1);
    if (count > 1) {
      grid = Eigen::VectorXd::LinSpaced(count, -1.0, 1.0);
    }
    params.item.thresholds.push_back(grid.replicate(1, shape.dims));
  }
  params.scales.item = Eigen::VectorXd::Ones(shape.items);
  params.scales.local = Eigen::MatrixXd::Ones(shape.items, shape.dims);
  params.scales.dimension = Eigen::VectorXd::Ones(shape.dims);
  params.traits = Eigen::MatrixXd::Zero(shape.persons, shape.dims);
  return params;
}

PriorConfig PriorConfig::with_schedule(int dims, double eta0, double xi0, double kappa_base,
                                       double kappa_ratio, double nu) {
  PriorConfig prior;
  prior.eta0 = eta0;
  prior.xi0 = xi0;
  prior.nu = nu;
  prior.kappa0.resize(dims);
  for (int d = 0; d < dims; ++d) {
    prior.kappa0[d] = kappa_base * std::pow(kappa_ratio, d);
  }
  prior.validate(dims);
  return prior;
}

void PriorConfig::validate(int dims) const {
  if (!(eta0 > 0.0) || !(xi0 > 0.0) || !(nu > 0.0)) {
    throw ContractError("prior constants eta0, xi0 and nu must be positive");
  }
  if (kappa0.size() != dims) {
    throw ContractError("kappa0 schedule length " + std::to_string(kappa0.size()) +
                        " differs from dimension count " + std::to_string(dims));
  }
  for (int d = 0; d < dims; ++d) {
    if (!(kappa0[d] > 0.0)) {
      throw ContractError("kappa0 entries must be positive");
    }
    if (d > 0 && !(kappa0[d] < kappa0[d - 1])) {
      throw ContractError("kappa0 schedule must be strictly decreasing");
    }
  }
}

void check_invariants(const ModelParams<double>& params) {
  const int items = params.items();
  const int dims = params.dims();
  if (params.item.location.rows() != items || params.item.location.cols() != dims ||
      static_cast<int>(params.item.thresholds.size()) != items ||
      params.scales.item.size() != items || params.scales.local.rows() != items ||
      params.scales.local.cols() != dims || params.scales.dimension.size() != dims ||
      params.traits.cols() != dims) {
    throw ContractError("parameter blocks have inconsistent shapes");
  }
  if (!params.item.discrimination.allFinite() || (params.item.discrimination.array() < 0.0).any()) {
    throw ContractError("discriminations must be finite and nonnegative");
  }
  if (!params.item.location.allFinite() || !params.traits.allFinite()) {
    throw ContractError("locations and traits must be finite");
  }
  for (int i = 0; i < items; ++i) {
    const Eigen::MatrixXd& tau = params.item.thresholds[static_cast<std::size_t>(i)];
    if (tau.cols() != dims || tau.rows() < 1 || !tau.allFinite()) {
      throw ContractError("thresholds of item " + std::to_string(i + 1) + " are malformed");
    }
    for (int d = 0; d < dims; ++d) {
      detail::check_ordered(tau.col(d));
    }
  }
  auto positive = [](const auto& m) { return m.allFinite() && (m.array() > 0.0).all(); };
  if (!positive(params.scales.item) || !positive(params.scales.local) ||
      !positive(params.scales.dimension)) {
    throw ContractError("horseshoe scales must be finite and strictly positive");
  }
}

bool satisfies_invariants(const ModelParams<double>& params) {
  try {
    check_invariants(params);
    return true;
  } catch (const ContractError&) {
    return false;
  }
}

namespace detail {

void check_category(int category, int num_categories) {
  if (category < 1 || category > num_categories) {
    throw ContractError("category " + std::to_string(category) + " outside 1.." +
                        std::to_string(num_categories));
  }
}

namespace {

// log S(x) + log S(-x) = log S'(x)
double log_sigmoid_slope(double x) { return ad::log_sigmoid(x) + ad::log_sigmoid(-x); }

}  // namespace

double mixture_cell(int category, int num_categories, std::span<const double> theta,
                    std::span<const double> lambda, std::span<const double> lower,
                    std::span<const double> upper, double nu, CellGradient* grad) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const std::size_t dims = lambda.size();
  const bool has_lower = category > 1;
  const bool has_upper = category < num_categories;

  thread_local std::vector<double> log_c, log_term, slope_a, slope_b;
  log_c.assign(dims, 0.0);
  log_term.assign(dims, kNegInf);
  slope_a.assign(dims, 0.0);
  slope_b.assign(dims, 0.0);

  double weight_total = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    if (lambda[d] < 0.0) {
      throw ContractError("negative discrimination");
    }
    weight_total += nu == 1.0 ? lambda[d] : (lambda[d] == 0.0 ? 0.0 : std::pow(lambda[d], nu));
  }
  if (!(weight_total > 0.0)) {
    throw DegenerateItemError("all discriminations of an item are zero");
  }

  double max_term = kNegInf;
  for (std::size_t d = 0; d < dims; ++d) {
    const double a = has_lower ? lambda[d] * (theta[d] - lower[d]) : 0.0;
    const double b = has_upper ? lambda[d] * (theta[d] - upper[d]) : 0.0;
    double lc = 0.0;
    if (has_lower) lc += ad::log_sigmoid(a);
    if (has_upper) lc += ad::log_sigmoid(-b);
    if (has_lower && has_upper) lc += std::log(-std::expm1(b - a));
    log_c[d] = lc;
    if (grad != nullptr) {
      if (has_lower) slope_a[d] = std::exp(log_sigmoid_slope(a) - lc);
      if (has_upper) slope_b[d] = -std::exp(log_sigmoid_slope(b) - lc);
    }
    if (lambda[d] > 0.0) {
      log_term[d] = nu * std::log(lambda[d]) + lc;
      max_term = std::max(max_term, log_term[d]);
    }
  }
  double log_mix = max_term;
  if (std::isfinite(max_term)) {
    double s = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      s += std::exp(log_term[d] - max_term);
    }
    log_mix = max_term + std::log(s);
  }
  const double value = dims == 1 ? log_c[0] : log_mix - std::log(weight_total);  // w = 1 exactly for D = 1

  if (grad != nullptr) {
    grad->theta.assign(dims, 0.0);
    grad->lambda.assign(dims, 0.0);
    grad->lower.assign(dims, 0.0);
    grad->upper.assign(dims, 0.0);
    for (std::size_t d = 0; d < dims; ++d) {
      const double lam = lambda[d];
      const double dpow = nu == 1.0 ? 1.0 : nu * std::pow(lam, nu - 1.0);
      const double share = std::exp(log_c[d] - log_mix);
      grad->lambda[d] = dims == 1 ? 0.0 : dpow * (share - 1.0 / weight_total);
      if (lam == 0.0) {
        continue;
      }
      const double r = dims == 1 ? 1.0 : std::exp(log_term[d] - log_mix);
      grad->theta[d] = r * lam * (slope_a[d] + slope_b[d]);
      grad->lower[d] = -r * lam * slope_a[d];
      grad->upper[d] = -r * lam * slope_b[d];
      double dl = 0.0;
      if (has_lower) dl += (theta[d] - lower[d]) * slope_a[d];
      if (has_upper) dl += (theta[d] - upper[d]) * slope_b[d];
      grad->lambda[d] += r * dl;
    }
  }
  return value;
}

}  // namespace detail

double inverse_gamma_sample(double shape, double scale, std::mt19937_64& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw ContractError("inverse-gamma shape and scale must be positive");
  }
  std::gamma_distribution<double> gamma(shape, 1.0);
  double g = gamma(rng);
  while (g == 0.0) {
    g = gamma(rng);
  }
  return scale / g;
}

double halfcauchy_aux_sample(double scale, std::mt19937_64& rng) {
  if (!(scale > 0.0)) {
    throw ContractError("half-Cauchy scale must be positive");
  }
  const double mixing = inverse_gamma_sample(0.5, 1.0 / (scale * scale), rng);
  const double x2 = inverse_gamma_sample(0.5, 1.0 / mixing, rng);
  return std::sqrt(x2);
}

}  // namespace irt
