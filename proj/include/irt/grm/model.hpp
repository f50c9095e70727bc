#pragma once

// Multidimensional graded response model with horseshoe-shrunk
// discriminations. Everything that touches parameters is templated on the
// scalar type so the same code evaluates densities in double precision and
// records them on an autodiff tape.

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irt/ad/tape.hpp"
#include "irt/errors.hpp"
#include "irt/grm/response_matrix.hpp"

namespace irt {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

struct ModelShape {
  int persons = 0;
  int items = 0;
  int dims = 0;
  Eigen::VectorXi categories;  // J_i per item

  static ModelShape of(const ResponseMatrix& data, int dims) {
    return {data.persons(), data.items(), dims, data.categories()};
  }
  friend bool operator==(const ModelShape& a, const ModelShape& b) {
    return a.persons == b.persons && a.items == b.items && a.dims == b.dims &&
           a.categories == b.categories;
  }
};

template <typename Scalar>
struct ItemParams {
  Matrix<Scalar> discrimination;           // I x D, lambda >= 0
  Matrix<Scalar> location;                 // I x D, threshold location mu
  std::vector<Matrix<Scalar>> thresholds;  // per item (J_i - 1) x D, strictly increasing columns
};

template <typename Scalar>
struct HorseshoeScales {
  Vector<Scalar> item;       // eta_i
  Matrix<Scalar> local;      // xi_i^(d), I x D
  Vector<Scalar> dimension;  // kappa^(d)
};

template <typename Scalar>
struct ModelParams {
  ItemParams<Scalar> item;
  HorseshoeScales<Scalar> scales;
  Matrix<Scalar> traits;  // P x D

  int persons() const { return static_cast<int>(traits.rows()); }
  int items() const { return static_cast<int>(item.discrimination.rows()); }
  int dims() const { return static_cast<int>(item.discrimination.cols()); }
};

/// Shapes every block for `shape`, filled with zeros (scales and
/// discriminations with ones, thresholds with an increasing grid).
ModelParams<double> make_params(const ModelShape& shape);

/// Prior hyperconstants.
struct PriorConfig {
  double eta0 = 0.01;
  double xi0 = 0.01;
  Eigen::VectorXd kappa0;  // per dimension, strictly decreasing
  double nu = 1.0;

  /// kappa0^(d) = base * ratio^d for 0-based d.
  static PriorConfig with_schedule(int dims, double eta0 = 0.01, double xi0 = 0.01,
                                   double kappa_base = 0.01, double kappa_ratio = 0.1,
                                   double nu = 1.0);
  void validate(int dims) const;
};

/// Throws ContractError naming the first violated invariant.
void check_invariants(const ModelParams<double>& params);
bool satisfies_invariants(const ModelParams<double>& params);

namespace detail {

inline constexpr double kLogTwo = std::numbers::ln2;
inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5 * log(2 pi)
inline constexpr double kLogPi = 1.14472988584940017414;

inline double sum_terms(std::span<const double> terms) {
  double total = 0.0;
  for (double t : terms) {
    total += t;
  }
  return total;
}
inline ad::Var sum_terms(std::span<const ad::Var> terms) { return ad::sum(terms); }

template <typename Scalar>
Scalar pow_nu(const Scalar& x, double nu) {
  using std::exp;
  using std::log;
  if (nu == 1.0) {
    return x;
  }
  if (ad::value_of(x) == 0.0) {
    return Scalar(0.0);
  }
  return exp(nu * log(x));
}

void check_category(int category, int num_categories);

template <typename Column>
void check_ordered(const Column& thresholds) {
  for (Eigen::Index k = 1; k < thresholds.size(); ++k) {
    if (!(ad::value_of(thresholds[k - 1]) < ad::value_of(thresholds[k]))) {
      throw ContractError("thresholds are not strictly increasing");
    }
  }
}

/// Fused value and partials of one mixture cell; see mixture_response_logprob.
/// `lower`/`upper` hold the bracketing thresholds per dimension (ignored at
/// the boundary categories). Partials are written per dimension.
struct CellGradient {
  std::vector<double> theta, lambda, lower, upper;
};
double mixture_cell(int category, int num_categories, std::span<const double> theta,
                    std::span<const double> lambda, std::span<const double> lower,
                    std::span<const double> upper, double nu, CellGradient* grad);

}  // namespace detail

/// Pr(X = j | theta, lambda, thresholds) = S(lambda (theta - tau_{j-1})) - S(lambda (theta - tau_j))
/// with tau_0 = -inf, tau_J = +inf. `thresholds` holds the J - 1 finite values.
template <typename Scalar, typename Thresholds>
Scalar grm_cat_prob(const Scalar& theta, const Scalar& lambda, const Thresholds& thresholds,
                    int category) {
  using ad::sigmoid;
  const int num_categories = static_cast<int>(thresholds.size()) + 1;
  detail::check_category(category, num_categories);
  detail::check_ordered(thresholds);
  const bool has_lower = category > 1;
  const bool has_upper = category < num_categories;
  const Scalar a = has_lower ? Scalar(lambda * (theta - thresholds[category - 2])) : Scalar(0.0);
  const Scalar b = has_upper ? Scalar(lambda * (theta - thresholds[category - 1])) : Scalar(0.0);
  // Subtract complements when both sigmoids are close to one.
  if (has_upper && ad::value_of(b) > 0.0) {
    return has_lower ? Scalar(sigmoid(-b) - sigmoid(-a)) : Scalar(sigmoid(-b));
  }
  if (!has_upper) {
    return has_lower ? Scalar(sigmoid(a)) : Scalar(1.0);
  }
  return has_lower ? Scalar(sigmoid(a) - sigmoid(b)) : Scalar(1.0 - sigmoid(b));
}

/// log grm_cat_prob via log S(a) + log S(-b) + log(1 - exp(b - a)).
template <typename Scalar, typename Thresholds>
Scalar log_grm_cat_prob(const Scalar& theta, const Scalar& lambda, const Thresholds& thresholds,
                        int category) {
  using ad::log_sigmoid;
  using std::expm1;
  using std::log;
  const int num_categories = static_cast<int>(thresholds.size()) + 1;
  detail::check_category(category, num_categories);
  const bool has_lower = category > 1;
  const bool has_upper = category < num_categories;
  if (!has_lower && !has_upper) {
    return Scalar(0.0);
  }
  if (!has_lower) {
    return log_sigmoid(Scalar(-(lambda * (theta - thresholds[category - 1]))));
  }
  const Scalar a = lambda * (theta - thresholds[category - 2]);
  if (!has_upper) {
    return log_sigmoid(a);
  }
  const Scalar b = lambda * (theta - thresholds[category - 1]);
  return log_sigmoid(a) + log_sigmoid(Scalar(-b)) + log(Scalar(-expm1(Scalar(b - a))));
}

/// w_d = lambda_d^nu / sum_d' lambda_d'^nu.
template <typename Scalar, typename Row>
Vector<Scalar> domain_weights(const Row& lambda, double nu) {
  if (!(nu > 0.0)) {
    throw ContractError("weight exponent nu must be positive");
  }
  const auto dims = static_cast<Eigen::Index>(lambda.size());
  Vector<Scalar> powered(dims);
  double total_value = 0.0;
  for (Eigen::Index d = 0; d < dims; ++d) {
    if (ad::value_of(lambda[d]) < 0.0) {
      throw ContractError("negative discrimination");
    }
    powered[d] = detail::pow_nu(Scalar(lambda[d]), nu);
    total_value += ad::value_of(powered[d]);
  }
  if (!(total_value > 0.0)) {
    throw DegenerateItemError("all discriminations of an item are zero");
  }
  std::vector<Scalar> parts(powered.data(), powered.data() + dims);
  const Scalar total = detail::sum_terms(std::span<const Scalar>(parts));
  Vector<Scalar> w(dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    w[d] = powered[d] / total;
  }
  return w;
}

/// log sum_d w_d Pr(X = category | theta_d, lambda_d, thresholds.col(d)), with
/// log-sum-exp over the nonzero-weight components. Composed from primitives.
template <typename Scalar, typename ThetaRow, typename LambdaRow>
Scalar mixture_response_logprob_generic(int category, const ThetaRow& theta, const LambdaRow& lambda,
                                        const Matrix<Scalar>& thresholds, double nu) {
  using std::log;
  const auto dims = static_cast<Eigen::Index>(lambda.size());
  if (theta.size() != dims || thresholds.cols() != dims) {
    throw ContractError("trait, discrimination and threshold dimensions differ");
  }
  const Vector<Scalar> w = domain_weights<Scalar>(lambda, nu);
  std::vector<Scalar> terms;
  terms.reserve(static_cast<std::size_t>(dims));
  for (Eigen::Index d = 0; d < dims; ++d) {
    if (ad::value_of(w[d]) == 0.0) {
      continue;
    }
    const auto column = thresholds.col(d);
    terms.push_back(log(w[d]) +
                    log_grm_cat_prob(Scalar(theta[d]), Scalar(lambda[d]), column, category));
  }
  if constexpr (std::is_same_v<Scalar, double>) {
    double m = -std::numeric_limits<double>::infinity();
    for (double t : terms) m = std::max(m, t);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
  } else {
    return ad::log_sum_exp(std::span<const Scalar>(terms));
  }
}

/// Mixture log-probability of one response. For tape scalars the whole cell
/// is recorded as a single node with analytic partials.
template <typename Scalar, typename ThetaRow, typename LambdaRow>
Scalar mixture_response_logprob(int category, const ThetaRow& theta, const LambdaRow& lambda,
                                const Matrix<Scalar>& thresholds, double nu) {
  const auto dims = static_cast<Eigen::Index>(lambda.size());
  if (theta.size() != dims || thresholds.cols() != dims) {
    throw ContractError("trait, discrimination and threshold dimensions differ");
  }
  const int num_categories = static_cast<int>(thresholds.rows()) + 1;
  detail::check_category(category, num_categories);
  thread_local std::vector<double> th, la, lo, up;
  th.resize(dims);
  la.resize(dims);
  lo.assign(dims, 0.0);
  up.assign(dims, 0.0);
  for (Eigen::Index d = 0; d < dims; ++d) {
    th[d] = ad::value_of(theta[d]);
    la[d] = ad::value_of(lambda[d]);
    if (category > 1) lo[d] = ad::value_of(thresholds(category - 2, d));
    if (category < num_categories) up[d] = ad::value_of(thresholds(category - 1, d));
  }
  if constexpr (std::is_same_v<Scalar, double>) {
    return detail::mixture_cell(category, num_categories, th, la, lo, up, nu, nullptr);
  } else {
    thread_local detail::CellGradient grad;
    const double value = detail::mixture_cell(category, num_categories, th, la, lo, up, nu, &grad);
    thread_local std::vector<ad::Var> ops;
    thread_local std::vector<double> partials;
    ops.clear();
    partials.clear();
    for (Eigen::Index d = 0; d < dims; ++d) {
      ops.push_back(theta[d]);
      partials.push_back(grad.theta[d]);
      ops.push_back(lambda[d]);
      partials.push_back(grad.lambda[d]);
      if (category > 1) {
        ops.push_back(thresholds(category - 2, d));
        partials.push_back(grad.lower[d]);
      }
      if (category < num_categories) {
        ops.push_back(thresholds(category - 1, d));
        partials.push_back(grad.upper[d]);
      }
    }
    return ad::precomputed(value, ops, partials);
  }
}

namespace detail {

template <typename Scalar>
Scalar half_normal_logpdf(const Scalar& x, const Scalar& scale) {
  using std::log;
  return kLogTwo - kHalfLogTwoPi - log(scale) - 0.5 * ad::square(Scalar(x / scale));
}

template <typename Scalar>
Scalar half_cauchy_logpdf(const Scalar& x, double scale) {
  using std::log;
  using std::log1p;
  return kLogTwo - kLogPi - std::log(scale) - log1p(ad::square(Scalar(x / scale)));
}

template <typename Scalar>
Scalar std_normal_logpdf(const Scalar& x) {
  return -kHalfLogTwoPi - 0.5 * ad::square(x);
}

inline double sum_of_squares(const Matrix<double>& m) { return m.squaredNorm(); }
inline ad::Var sum_of_squares(const Matrix<ad::Var>& m) {
  const std::span<const ad::Var> flat(m.data(), static_cast<std::size_t>(m.size()));
  return ad::dot(flat, flat);
}

template <typename Scalar>
void check_scale_positive(const Scalar& s, const char* what) {
  if (!(ad::value_of(s) > 0.0)) {
    throw ContractError(std::string("nonpositive scale: ") + what);
  }
}

}  // namespace detail

/// Log prior density of every parameter block under the horseshoe hierarchy.
template <typename Scalar>
Scalar log_prior(const ModelParams<Scalar>& params, const PriorConfig& prior) {
  using detail::half_cauchy_logpdf;
  using detail::std_normal_logpdf;
  const int items = params.items();
  const int dims = params.dims();
  prior.validate(dims);
  std::vector<Scalar> terms;
  terms.reserve(static_cast<std::size_t>(items * dims * 8 + dims + 2));

  for (int d = 0; d < dims; ++d) {
    const Scalar& kappa = params.scales.dimension[d];
    detail::check_scale_positive(kappa, "kappa");
    terms.push_back(half_cauchy_logpdf(kappa, prior.kappa0[d]));
  }
  for (int i = 0; i < items; ++i) {
    const Scalar& eta = params.scales.item[i];
    detail::check_scale_positive(eta, "eta");
    terms.push_back(half_cauchy_logpdf(eta, prior.eta0));
    const Matrix<Scalar>& tau = params.item.thresholds[static_cast<std::size_t>(i)];
    for (int d = 0; d < dims; ++d) {
      const Scalar& xi = params.scales.local(i, d);
      detail::check_scale_positive(xi, "xi");
      terms.push_back(half_cauchy_logpdf(xi, prior.xi0));
      const Scalar lambda_scale = eta * xi * params.scales.dimension[d];
      const Scalar& lambda = params.item.discrimination(i, d);
      if (ad::value_of(lambda) < 0.0) {
        throw ContractError("negative discrimination");
      }
      terms.push_back(detail::half_normal_logpdf(lambda, lambda_scale));

      const Scalar& mu = params.item.location(i, d);
      terms.push_back(std_normal_logpdf(mu));
      terms.push_back(std_normal_logpdf(Scalar(tau(0, d) - mu)));
      for (Eigen::Index k = 1; k < tau.rows(); ++k) {
        if (!(ad::value_of(tau(k, d)) > ad::value_of(tau(k - 1, d)))) {
          throw ContractError("thresholds are not strictly increasing");
        }
        terms.push_back(detail::kLogTwo + std_normal_logpdf(Scalar(tau(k, d) - tau(k - 1, d))));
      }
    }
  }
  const double trait_count = static_cast<double>(params.traits.size());
  terms.push_back(-detail::kHalfLogTwoPi * trait_count -
                  0.5 * detail::sum_of_squares(params.traits));
  return detail::sum_terms(std::span<const Scalar>(terms));
}

/// Sum of mixture log-probabilities over person p's non-missing items.
template <typename Scalar>
Scalar person_loglik(const ModelParams<Scalar>& params, const ResponseMatrix& data, int person,
                     double nu) {
  Scalar total(0.0);
  for (int i = 0; i < data.items(); ++i) {
    if (data.missing(person, i)) {
      continue;
    }
    total += mixture_response_logprob(data.code(person, i), params.traits.row(person),
                                      params.item.discrimination.row(i),
                                      params.item.thresholds[static_cast<std::size_t>(i)], nu);
  }
  return total;
}

template <typename Scalar>
void check_shape(const ModelParams<Scalar>& params, const ResponseMatrix& data) {
  if (params.persons() != data.persons() || params.items() != data.items()) {
    throw ContractError("parameter and data dimensions differ: params " +
                        std::to_string(params.persons()) + "x" + std::to_string(params.items()) +
                        ", data " + std::to_string(data.persons()) + "x" +
                        std::to_string(data.items()));
  }
  for (int i = 0; i < data.items(); ++i) {
    if (params.item.thresholds[static_cast<std::size_t>(i)].rows() != data.categories(i) - 1) {
      throw ContractError("threshold count of item " + std::to_string(i + 1) +
                          " does not match its category count");
    }
  }
}

/// Log likelihood (person-major sum over non-missing cells) plus log prior.
template <typename Scalar>
Scalar joint_log_density(const ModelParams<Scalar>& params, const ResponseMatrix& data,
                         const PriorConfig& prior) {
  check_shape(params, data);
  std::vector<Scalar> terms;
  terms.reserve(static_cast<std::size_t>(data.persons()) * data.items() + 1);
  for (int p = 0; p < data.persons(); ++p) {
    for (int i = 0; i < data.items(); ++i) {
      if (data.missing(p, i)) {
        continue;
      }
      terms.push_back(mixture_response_logprob(
          data.code(p, i), params.traits.row(p), params.item.discrimination.row(i),
          params.item.thresholds[static_cast<std::size_t>(i)], prior.nu));
    }
  }
  terms.push_back(log_prior(params, prior));
  return detail::sum_terms(std::span<const Scalar>(terms));
}

/// Half-Cauchy(0, scale) draw through the nested inverse-gamma representation:
/// a ~ IG(1/2, 1/scale^2), x^2 | a ~ IG(1/2, 1/a).
double halfcauchy_aux_sample(double scale, std::mt19937_64& rng);

/// Inverse-gamma draw with the given shape and scale.
double inverse_gamma_sample(double shape, double scale, std::mt19937_64& rng);

}  // namespace irt
