#include "irt/advi/variational.hpp"

#include <cmath>
#include <numbers>
#include <thread>

namespace irt {

namespace {

constexpr int kMaxRedraws = 10;

bool try_value(const LogDensity& target, std::span<const double> u, double& out) {
  try {
    out = target.value(u);
  } catch (const NumericalError&) {
    return false;
  }
  return std::isfinite(out);
}

bool try_gradient(const LogDensity& target, std::span<const double> u, Eigen::Ref<Eigen::VectorXd> grad,
                  double& out) {
  try {
    out = target.gradient(u, grad);
  } catch (const NumericalError&) {
    return false;
  }
  return std::isfinite(out) && grad.allFinite();
}

void check_noise(const VariationalPosterior& q, const Eigen::MatrixXd& noise) {
  q.validate();
  if (noise.rows() != q.size() || noise.cols() < 1) {
    throw ContractError("noise matrix must have one row per coordinate and at least one column");
  }
}

Eigen::VectorXd reparameterize(const VariationalPosterior& q, const Eigen::Ref<const Eigen::VectorXd>& eps) {
  return q.location + (q.log_scale.array().exp() * eps.array()).matrix();
}

}  // namespace

GrmLogDensity::GrmLogDensity(const ResponseMatrix& data, PriorConfig prior, TransformSpec transform)
    : data_(data), prior_(std::move(prior)), transform_(std::move(transform)) {
  if (!(ModelShape::of(data_, transform_.shape().dims) == transform_.shape())) {
    throw ContractError("transform layout does not match the response data");
  }
  prior_.validate(transform_.shape().dims);
}

double GrmLogDensity::value(std::span<const double> u) const {
  double log_jacobian = 0.0;
  const ModelParams<double> params = transform_.constrain<double>(u, &log_jacobian);
  return joint_log_density(params, data_, prior_) + log_jacobian;
}

double GrmLogDensity::gradient(std::span<const double> u, Eigen::Ref<Eigen::VectorXd> grad) const {
  thread_local ad::Tape tape;
  thread_local std::vector<ad::Var> leaves;
  tape.clear();
  leaves.clear();
  for (double x : u) {
    leaves.push_back(tape.variable(x));
  }
  ad::Var log_jacobian;
  const ModelParams<ad::Var> params = transform_.constrain<ad::Var>(leaves, &log_jacobian);
  const ad::Var total = joint_log_density(params, data_, prior_) + log_jacobian;
  grad.setZero();
  tape.accumulate_gradient(total, 1.0, grad);
  return total.value();
}

double VariationalPosterior::entropy() const {
  const double n = static_cast<double>(log_scale.size());
  return log_scale.sum() + 0.5 * n * (1.0 + std::log(2.0 * std::numbers::pi));
}

void VariationalPosterior::validate() const {
  if (location.size() != log_scale.size() || location.size() != transform.size()) {
    throw ContractError("variational posterior blocks have inconsistent lengths");
  }
  if (!location.allFinite() || !log_scale.allFinite()) {
    throw ContractError("variational posterior has non-finite entries");
  }
}

VariationalPosterior make_posterior(const TransformSpec& transform, const Eigen::VectorXd& location,
                                    double log_scale) {
  VariationalPosterior q{location, Eigen::VectorXd::Constant(location.size(), log_scale), transform};
  q.validate();
  return q;
}

Eigen::MatrixXd draw_noise(Eigen::Index dimension, int n_mc, std::mt19937_64& rng) {
  if (n_mc < 1) {
    throw ContractError("at least one Monte Carlo sample is required");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd noise(dimension, n_mc);
  for (Eigen::Index k = 0; k < noise.size(); ++k) {
    noise.data()[k] = normal(rng);
  }
  return noise;
}

double elbo_estimate(const VariationalPosterior& q, const LogDensity& target, const Eigen::MatrixXd& noise) {
  check_noise(q, noise);
  double total = 0.0;
  for (Eigen::Index s = 0; s < noise.cols(); ++s) {
    const Eigen::VectorXd u = reparameterize(q, noise.col(s));
    double v = 0.0;
    if (!try_value(target, as_span(u), v)) {
      throw NumericalError("log density is not finite at a surrogate draw");
    }
    total += v;
  }
  return total / static_cast<double>(noise.cols()) + q.entropy();
}

double elbo_estimate(const VariationalPosterior& q, const LogDensity& target, int n_mc,
                     std::mt19937_64& rng) {
  Eigen::MatrixXd noise = draw_noise(q.size(), n_mc, rng);
  double total = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index s = 0; s < noise.cols(); ++s) {
    double v = 0.0;
    int attempt = 0;
    while (!try_value(target, as_span(reparameterize(q, noise.col(s))), v)) {
      if (++attempt > kMaxRedraws) {
        throw NumericalError("log density not finite after " + std::to_string(kMaxRedraws) + " redraws");
      }
      for (Eigen::Index k = 0; k < noise.rows(); ++k) noise(k, s) = normal(rng);
    }
    total += v;
  }
  return total / static_cast<double>(n_mc) + q.entropy();
}

namespace {

// Evaluates gradients column by column; columns listed in `failed` could not be evaluated.
void gradient_columns(const VariationalPosterior& q, const LogDensity& target, const Eigen::MatrixXd& noise,
                      Eigen::MatrixXd& grads, Eigen::VectorXd& values, std::vector<char>& ok, int threads) {
  const Eigen::Index n = noise.cols();
  grads.resize(q.size(), n);
  values.resize(n);
  ok.assign(static_cast<std::size_t>(n), 0);
  auto work = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index s = begin; s < end; ++s) {
      const Eigen::VectorXd u = reparameterize(q, noise.col(s));
      double v = 0.0;
      ok[static_cast<std::size_t>(s)] = try_gradient(target, as_span(u), grads.col(s), v) ? 1 : 0;
      values[s] = v;
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    work(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  for (auto& t : pool) t.join();
}

ElboGradient reduce(const VariationalPosterior& q, const Eigen::MatrixXd& noise, const Eigen::MatrixXd& grads,
                    const Eigen::VectorXd& values) {
  const double n = static_cast<double>(noise.cols());
  const Eigen::VectorXd scale = q.scale();
  ElboGradient out;
  out.location = Eigen::VectorXd::Zero(q.size());
  out.log_scale = Eigen::VectorXd::Zero(q.size());
  double total = 0.0;
  for (Eigen::Index s = 0; s < noise.cols(); ++s) {
    out.location += grads.col(s);
    out.log_scale.array() += grads.col(s).array() * noise.col(s).array() * scale.array();
    total += values[s];
  }
  out.location /= n;
  out.log_scale /= n;
  out.log_scale.array() += 1.0;  // entropy term
  out.elbo = total / n + q.entropy();
  return out;
}

}  // namespace

ElboGradient elbo_gradient(const VariationalPosterior& q, const LogDensity& target, const Eigen::MatrixXd& noise,
                           int threads) {
  check_noise(q, noise);
  Eigen::MatrixXd grads;
  Eigen::VectorXd values;
  std::vector<char> ok;
  gradient_columns(q, target, noise, grads, values, ok, threads);
  for (char c : ok) {
    if (!c) throw NumericalError("log density is not finite at a surrogate draw");
  }
  return reduce(q, noise, grads, values);
}

ElboGradient elbo_gradient(const VariationalPosterior& q, const LogDensity& target, int n_mc,
                           std::mt19937_64& rng, int threads) {
  q.validate();
  Eigen::MatrixXd noise = draw_noise(q.size(), n_mc, rng);
  Eigen::MatrixXd grads;
  Eigen::VectorXd values;
  std::vector<char> ok;
  gradient_columns(q, target, noise, grads, values, ok, threads);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index s = 0; s < noise.cols(); ++s) {
    int attempt = 0;
    while (!ok[static_cast<std::size_t>(s)]) {
      if (++attempt > kMaxRedraws) {
        throw NumericalError("log density not finite after " + std::to_string(kMaxRedraws) + " redraws");
      }
      for (Eigen::Index k = 0; k < noise.rows(); ++k) noise(k, s) = normal(rng);
      const Eigen::VectorXd u = reparameterize(q, noise.col(s));
      double v = 0.0;
      ok[static_cast<std::size_t>(s)] = try_gradient(target, as_span(u), grads.col(s), v) ? 1 : 0;
      values[s] = v;
    }
  }
  return reduce(q, noise, grads, values);
}

double elbo_estimate(const VariationalPosterior& q, const ResponseMatrix& data, const PriorConfig& prior,
                     int n_mc, std::mt19937_64& rng) {
  const GrmLogDensity target(data, prior, q.transform);
  return elbo_estimate(q, target, n_mc, rng);
}

ElboGradient elbo_gradient(const VariationalPosterior& q, const ResponseMatrix& data, const PriorConfig& prior,
                           int n_mc, std::mt19937_64& rng, int threads) {
  const GrmLogDensity target(data, prior, q.transform);
  return elbo_gradient(q, target, n_mc, rng, threads);
}

PosteriorDraws sample_posterior(const VariationalPosterior& q, int draws, std::mt19937_64& rng) {
  if (draws < 2) {
    throw ContractError("at least 2 posterior draws are required");
  }
  q.validate();
  const Eigen::MatrixXd noise = draw_noise(q.size(), draws, rng);
  PosteriorDraws out;
  out.reserve(static_cast<std::size_t>(draws));
  for (int s = 0; s < draws; ++s) {
    const Eigen::VectorXd u = reparameterize(q, noise.col(s));
    out.push_back(q.transform.constrain<double>(as_span(u), nullptr));
  }
  return out;
}

ModelParams<double> posterior_mean(const VariationalPosterior& q) {
  q.validate();
  std::vector<double> x(static_cast<std::size_t>(q.size()));
  for (const TransformSegment& seg : q.transform.segments()) {
    for (Eigen::Index k = seg.offset; k < seg.offset + seg.length; ++k) {
      const double m = q.location[k];
      const double s = std::exp(q.log_scale[k]);
      const double lognormal_mean = std::exp(m + 0.5 * s * s);
      double& out = x[static_cast<std::size_t>(k)];
      switch (seg.kind) {
        case TransformKind::Identity: out = m; break;
        case TransformKind::Log: out = lognormal_mean; break;
        case TransformKind::Ordered:
          out = k == seg.offset ? m : x[static_cast<std::size_t>(k - 1)] + lognormal_mean;
          break;
      }
    }
  }
  const Eigen::VectorXd u = q.transform.inverse(x);
  return q.transform.constrain<double>(as_span(u), nullptr);
}

Eigen::MatrixXd expected_domain_weights(const PosteriorDraws& draws, double nu) {
  if (draws.empty()) {
    throw ContractError("no posterior draws");
  }
  const int I = draws.front().items();
  const int D = draws.front().dims();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(I, D);
  for (const ModelParams<double>& p : draws) {
    for (int i = 0; i < I; ++i) {
      w.row(i) += domain_weights<double>(p.item.discrimination.row(i), nu).transpose();
    }
  }
  return w / static_cast<double>(draws.size());
}

}  // namespace irt
