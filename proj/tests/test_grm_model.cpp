#include <algorithm>
#include <random>

#include "doctest.h"
#include "irt/grm/model.hpp"
#include "test_support.hpp"

using namespace irt;
namespace ad = irt::ad;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

}  // namespace

TEST_CASE("grm_cat_prob worked example") {
  const Eigen::VectorXd tau = vec({-1.0, 1.0});
  CHECK(grm_cat_prob(0.0, 1.0, tau, 1) == doctest::Approx(0.26894).epsilon(1e-5));
  CHECK(grm_cat_prob(0.0, 1.0, tau, 2) == doctest::Approx(0.46212).epsilon(1e-5));
  CHECK(grm_cat_prob(0.0, 1.0, tau, 3) == doctest::Approx(0.26894).epsilon(1e-5));
}

TEST_CASE("grm_cat_prob with zero discrimination") {
  const Eigen::VectorXd tau = vec({-0.3, 2.0});
  for (double theta : {-3.0, 0.0, 4.0}) {
    CHECK(grm_cat_prob(theta, 0.0, tau, 1) == 0.5);
    CHECK(grm_cat_prob(theta, 0.0, tau, 2) == 0.0);
    CHECK(grm_cat_prob(theta, 0.0, tau, 3) == 0.5);
  }
}

TEST_CASE("grm_cat_prob contract errors") {
  CHECK_THROWS_AS((void)grm_cat_prob(0.0, 1.0, vec({-1.0, 1.0}), 0), ContractError);
  CHECK_THROWS_AS((void)grm_cat_prob(0.0, 1.0, vec({-1.0, 1.0}), 4), ContractError);
  CHECK_THROWS_AS((void)grm_cat_prob(0.0, 1.0, vec({1.0, -1.0}), 2), ContractError);
  CHECK_THROWS_AS((void)grm_cat_prob(0.0, 1.0, vec({1.0, 1.0}), 2), ContractError);
}

TEST_CASE("category probabilities sum to one and are monotone in theta") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_real_distribution<double> lam(0.0, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int J = 2 + trial % 7;
    Eigen::VectorXd tau(J - 1);
    for (int k = 0; k < J - 1; ++k) tau[k] = u(rng);
    std::sort(tau.data(), tau.data() + tau.size());
    const double theta = u(rng);
    const double lambda = lam(rng);
    double total = 0.0;
    for (int j = 1; j <= J; ++j) {
      const double pj = grm_cat_prob(theta, lambda, tau, j);
      CHECK(pj >= 0.0);
      CHECK(pj <= 1.0);
      total += pj;
      CHECK(std::exp(log_grm_cat_prob(theta, lambda, tau, j)) == doctest::Approx(pj).epsilon(1e-10));
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    // Pr(X >= j) = S(lambda (theta - tau_{j-1}))
    const int j = 2 + trial % (J - 1);
    double prev = 0.0;
    for (double t = -6.0; t <= 6.0; t += 0.25) {
      const double cumulative = ad::sigmoid(lambda * (t - tau[j - 2]));
      CHECK(cumulative >= prev);
      prev = cumulative;
    }
  }
}

TEST_CASE("domain_weights examples") {
  auto w = domain_weights<double>(vec({2.0, 2.0}), 1.0);
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 0.5);
  w = domain_weights<double>(vec({3.0, 1.0}), 1.0);
  CHECK(w[0] == doctest::Approx(0.75));
  CHECK(w[1] == doctest::Approx(0.25));
  w = domain_weights<double>(vec({3.0, 1.0}), 2.0);
  CHECK(w[0] == doctest::Approx(0.9));
  CHECK(w[1] == doctest::Approx(0.1));
  CHECK_THROWS_AS((void)domain_weights<double>(vec({0.0, 0.0}), 1.0), DegenerateItemError);
}

TEST_CASE("domain weights are a simplex invariant to rescaling") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lam(0.01, 4.0);
  std::uniform_real_distribution<double> nus(0.25, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd l(1 + trial % 4);
    for (Eigen::Index d = 0; d < l.size(); ++d) l[d] = lam(rng);
    const double nu = nus(rng);
    const auto w = domain_weights<double>(l, nu);
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    CHECK((w.array() >= 0.0).all());
    const auto w2 = domain_weights<double>(Eigen::VectorXd(l * 7.3), nu);
    CHECK((w - w2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mixture log-probability reductions") {
  const Eigen::MatrixXd tau = vec({-1.0, 1.0});
  const Eigen::VectorXd theta1 = vec({0.4});
  const Eigen::VectorXd lambda1 = vec({1.3});
  for (int j = 1; j <= 3; ++j) {
    CHECK(mixture_response_logprob(j, theta1, lambda1, tau, 1.0) ==
          log_grm_cat_prob(0.4, 1.3, tau.col(0), j));
  }
  Eigen::MatrixXd tau2(2, 2);
  tau2 << -1.0, -1.0, 1.0, 1.0;
  const Eigen::VectorXd theta2 = vec({0.0, 0.0});
  const Eigen::VectorXd lambda2 = vec({1.0, 1.0});
  CHECK(mixture_response_logprob(2, theta2, lambda2, tau2, 1.0) ==
        doctest::Approx(std::log(0.46212)).epsilon(1e-5));
  CHECK(mixture_response_logprob(2, theta2, lambda2, tau2, 1.0) ==
        doctest::Approx(mixture_response_logprob(2, vec({0.0}), vec({1.0}), tau, 1.0)).epsilon(1e-14));
  CHECK_THROWS_AS((void)mixture_response_logprob(1, theta2, vec({0.0, 0.0}), tau2, 1.0),
                  DegenerateItemError);
}

TEST_CASE("fused mixture node agrees with the primitive composition") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> lam(0.2, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int D = 1 + trial % 3;
    const int J = 2 + trial % 5;
    const int j = 1 + (trial / 3) % J;
    const double nu = trial % 2 == 0 ? 1.0 : 1.7;
    std::vector<double> point;
    for (int d = 0; d < D; ++d) point.push_back(u(rng));
    for (int d = 0; d < D; ++d) point.push_back(lam(rng));
    for (int d = 0; d < D; ++d) {
      double t = u(rng) - 1.0;
      for (int k = 0; k < J - 1; ++k) {
        point.push_back(t);
        t += 0.1 + 0.6 * lam(rng);
      }
    }
    auto unpack = [&](std::span<const ad::Var> v) {
      Vector<ad::Var> theta(D), lambda(D);
      Matrix<ad::Var> tau(J - 1, D);
      for (int d = 0; d < D; ++d) {
        theta[d] = v[static_cast<std::size_t>(d)];
        lambda[d] = v[static_cast<std::size_t>(D + d)];
        for (int k = 0; k < J - 1; ++k) tau(k, d) = v[static_cast<std::size_t>(2 * D + d * (J - 1) + k)];
      }
      return std::make_tuple(theta, lambda, tau);
    };
    const auto fused = ad::record(
        [&](auto v) {
          auto [theta, lambda, tau] = unpack(v);
          return mixture_response_logprob(j, theta, lambda, tau, nu);
        },
        point);
    const auto generic = ad::record(
        [&](auto v) {
          auto [theta, lambda, tau] = unpack(v);
          return mixture_response_logprob_generic(j, theta, lambda, tau, nu);
        },
        point);
    CHECK(fused.value() == doctest::Approx(generic.value()).epsilon(1e-12));
    const auto gf = ad::backward(fused);
    const auto gg = ad::backward(generic);
    CHECK((gf - gg).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + gg.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("log_prior term examples") {
  ModelShape shape{3, 2, 2, Eigen::VectorXi::Constant(2, 3)};
  std::mt19937_64 rng(1);
  ModelParams<double> p = testing::random_params(shape, rng);
  const PriorConfig prior = PriorConfig::with_schedule(2);

  // trait prior at the mode
  ModelParams<double> zero = p;
  zero.traits.setZero();
  ModelParams<double> shifted = zero;
  shifted.traits(1, 1) = 1.0;
  CHECK(log_prior(zero, prior) - log_prior(shifted, prior) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(testing::oracle::log_prior(zero, prior) == doctest::Approx(log_prior(zero, prior)).epsilon(1e-13));

  // half-Cauchy at x = sigma
  const double sigma = 0.37;
  CHECK(detail::half_cauchy_logpdf(sigma, sigma) == doctest::Approx(std::log(1.0 / (M_PI * sigma))).epsilon(1e-14));

  // doubling eta_0 of item 0 moves only the half-normal and eta terms
  ModelParams<double> doubled = p;
  doubled.scales.item[0] *= 2.0;
  double expected = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double s_old = p.scales.item[0] * p.scales.local(0, d) * p.scales.dimension[d];
    expected += testing::oracle::half_normal_logpdf(p.item.discrimination(0, d), 2.0 * s_old) -
                testing::oracle::half_normal_logpdf(p.item.discrimination(0, d), s_old);
  }
  expected += testing::oracle::half_cauchy_logpdf(2.0 * p.scales.item[0], prior.eta0) -
              testing::oracle::half_cauchy_logpdf(p.scales.item[0], prior.eta0);
  CHECK(log_prior(doubled, prior) - log_prior(p, prior) == doctest::Approx(expected).epsilon(1e-10));

  ModelParams<double> bad = p;
  bad.scales.dimension[1] = 0.0;
  CHECK_THROWS_AS((void)log_prior(bad, prior), ContractError);
}

TEST_CASE("joint_log_density special cases") {
  std::mt19937_64 rng(4);
  ModelShape shape{2, 3, 2, Eigen::VectorXi::Constant(3, 4)};
  const ModelParams<double> p = testing::random_params(shape, rng);
  const PriorConfig prior = PriorConfig::with_schedule(2);
  const ResponseMatrix empty(Eigen::MatrixXi::Zero(2, 3), shape.categories);
  CHECK(joint_log_density(p, empty, prior) == log_prior(p, prior));

  ModelShape one{1, 1, 1, Eigen::VectorXi::Constant(1, 3)};
  const ModelParams<double> q = testing::random_params(one, rng);
  const PriorConfig prior1 = PriorConfig::with_schedule(1);
  const ResponseMatrix x(Eigen::MatrixXi::Constant(1, 1, 2), one.categories);
  CHECK(joint_log_density(q, x, prior1) ==
        log_prior(q, prior1) + mixture_response_logprob(2, q.traits.row(0), q.item.discrimination.row(0),
                                                        q.item.thresholds[0], 1.0));

  const ResponseMatrix wrong(Eigen::MatrixXi::Constant(3, 3, 1), shape.categories);
  CHECK_THROWS_AS((void)joint_log_density(p, wrong, prior), ContractError);
}

TEST_CASE("joint_log_density matches the independent reference") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    ModelShape shape{3, 2, 2, Eigen::VectorXi::Constant(2, 3)};
    if (trial >= 10) shape = testing::random_shape(rng, 6, 5, 3, 6);
    const ModelParams<double> p = testing::random_params(shape, rng);
    const ResponseMatrix x = testing::random_responses(shape, rng, 0.1);
    const PriorConfig prior = PriorConfig::with_schedule(shape.dims, 0.01, 0.01, 0.01, 0.1, trial % 2 ? 1.0 : 2.0);
    CHECK(std::abs(joint_log_density(p, x, prior) - testing::oracle::joint_log_density(p, x, prior)) < 1e-10);
  }
}

TEST_CASE("joint log density gradient on a 2x2 D=1 model") {
  std::mt19937_64 rng(12);
  ModelShape shape{2, 2, 1, Eigen::VectorXi::Constant(2, 3)};
  const ModelParams<double> p = testing::random_params(shape, rng);
  const ResponseMatrix x = testing::random_responses(shape, rng);
  const PriorConfig prior = PriorConfig::with_schedule(1);
  const std::vector<double> point = testing::pack(p);
  const double err = ad::check_gradients(
      [&](std::span<const ad::Var> v) {
        return joint_log_density(testing::unpack<ad::Var>(p, v), x, prior);
      },
      point, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("every parameter influences the joint density") {
  std::mt19937_64 rng(17);
  ModelShape shape{3, 2, 2, Eigen::VectorXi::Constant(2, 4)};
  const ModelParams<double> p = testing::random_params(shape, rng);
  const ResponseMatrix x = testing::random_responses(shape, rng);
  const PriorConfig prior = PriorConfig::with_schedule(2);
  const double base = joint_log_density(p, x, prior);
  const std::vector<double> flat = testing::pack(p);
  for (std::size_t k = 0; k < flat.size(); ++k) {
    std::vector<double> moved = flat;
    moved[k] += 1e-3;
    const auto q = testing::unpack<double>(p, std::span<const double>(moved));
    if (!satisfies_invariants(q)) continue;
    CAPTURE(k);
    CHECK(joint_log_density(q, x, prior) != base);
  }
}

TEST_CASE("half-Cauchy auxiliary sampler") {
  std::mt19937_64 rng(2024);
  const int n = 100000;
  auto ks = [&](double sigma, double divide) {
    std::vector<double> xs(n);
    for (double& x : xs) {
      x = halfcauchy_aux_sample(sigma, rng) / divide;
      CHECK_MESSAGE(x > 0.0, "sample not positive");
    }
    std::sort(xs.begin(), xs.end());
    double stat = 0.0;
    for (int k = 0; k < n; ++k) {
      const double cdf = 2.0 / M_PI * std::atan(xs[static_cast<std::size_t>(k)]);
      stat = std::max({stat, (k + 1.0) / n - cdf, cdf - static_cast<double>(k) / n});
    }
    return stat;
  };
  const double critical = 1.63 / std::sqrt(static_cast<double>(n));
  CHECK(ks(1.0, 1.0) < critical);
  CHECK(ks(2.0, 2.0) < critical);
  CHECK_THROWS_AS((void)halfcauchy_aux_sample(0.0, rng), ContractError);
}
