// Acceptance suite: one PASS/FAIL (or SKIP) line per criterion; exit status 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "irt/ad/tape.hpp"
#include "irt/advi/fit.hpp"
#include "irt/eval/waic.hpp"
#include "irt/io/artifacts.hpp"
#include "irt/io/csv.hpp"
#include "irt/nn/encoder.hpp"
#include "irt/sim/simulator.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace irt;

namespace {

struct Outcome {
  enum Kind { Pass, Fail, Skip } kind;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd x = a.array() - a.mean();
  const Eigen::ArrayXd y = b.array() - b.mean();
  return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

// ---- 1: gradients of the full joint density against finite differences ----

// Fourth-order central difference of the plain-double reference density.
std::vector<double> reference_gradient(const ModelParams<double>& like, const ResponseMatrix& x,
                                       const PriorConfig& prior, std::vector<double> point, double h) {
  auto f = [&](const std::vector<double>& v) {
    return testing::oracle::joint_log_density(testing::unpack<double>(like, std::span<const double>(v)), x, prior);
  };
  std::vector<double> grad(point.size());
  for (std::size_t k = 0; k < point.size(); ++k) {
    const double x0 = point[k];
    auto at = [&](double offset) {
      point[k] = x0 + offset;
      return f(point);
    };
    const double d1 = (at(h) - at(-h)) / (2.0 * h);
    const double d2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
    point[k] = x0;
    grad[k] = (4.0 * d1 - d2) / 3.0;
  }
  return grad;
}

Outcome criterion_gradients() {
  double worst = 0.0;
  long components = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    const ModelShape shape = testing::random_shape(rng, 5, 4, 3, 5);
    const ModelParams<double> p = testing::random_params(shape, rng);
    const ResponseMatrix x = testing::random_responses(shape, rng, 0.1);
    const PriorConfig prior = PriorConfig::with_schedule(shape.dims);
    const std::vector<double> point = testing::pack(p);
    const ad::Recording rec = ad::record(
        [&](std::span<const ad::Var> v) { return joint_log_density(testing::unpack<ad::Var>(p, v), x, prior); },
        point);
    const ad::GradientVector g = ad::backward(rec);
    const std::vector<double> fd = reference_gradient(p, x, prior, point, 1e-3);
    for (std::size_t k = 0; k < point.size(); ++k) {
      const double err = std::abs(g[static_cast<Eigen::Index>(k)] - fd[k]) / std::abs(fd[k]);
      worst = std::max(worst, err);
      ++components;
    }
  }
  const bool ok = worst < 1e-6;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "max componentwise relative error " + fmt(worst, 3) + " over " + std::to_string(components) +
              " components, 100 seeds (threshold 1e-6)"};
}

// ---- 2: likelihood properties ----

Outcome criterion_likelihood() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_real_distribution<double> lam(0.01, 5.0);
  double worst_sum = 0.0;
  for (int g = 0; g < 1000; ++g) {
    const int J = 2 + g % 8;
    Eigen::VectorXd tau(J - 1);
    for (int k = 0; k < J - 1; ++k) tau[k] = u(rng);
    std::sort(tau.data(), tau.data() + tau.size());
    if (J > 2 && (tau.tail(J - 2) - tau.head(J - 2)).minCoeff() <= 0.0) continue;
    const double theta = -6.0 + 12.0 * g / 999.0;
    const double lambda = lam(rng);
    double total = 0.0;
    for (int j = 1; j <= J; ++j) total += grm_cat_prob(theta, lambda, tau, j);
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }

  bool reduction_exact = true;
  for (int g = 0; g < 1000; ++g) {
    const int J = 2 + g % 6;
    Eigen::MatrixXd tau(J - 1, 1);
    for (int k = 0; k < J - 1; ++k) tau(k, 0) = u(rng);
    std::sort(tau.data(), tau.data() + tau.size());
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, u(rng));
    const Eigen::VectorXd lambda = Eigen::VectorXd::Constant(1, lam(rng));
    for (int j = 1; j <= J; ++j) {
      if (mixture_response_logprob(j, theta, lambda, tau, 1.0) !=
          log_grm_cat_prob(theta[0], lambda[0], tau.col(0), j)) {
        reduction_exact = false;
      }
    }
  }

  std::uniform_real_distribution<double> nus(0.25, 3.0), factor(0.01, 100.0);
  double worst_simplex = 0.0, worst_rescale = 0.0;
  for (int g = 0; g < 1000; ++g) {
    Eigen::VectorXd l(1 + g % 5);
    for (Eigen::Index d = 0; d < l.size(); ++d) l[d] = lam(rng);
    const double nu = nus(rng);
    const Eigen::VectorXd w = domain_weights<double>(l, nu);
    if ((w.array() < 0.0).any()) worst_simplex = 1.0;
    worst_simplex = std::max(worst_simplex, std::abs(w.sum() - 1.0));
    const Eigen::VectorXd scaled = l * factor(rng);
    worst_rescale = std::max(worst_rescale, (domain_weights<double>(scaled, nu) - w).cwiseAbs().maxCoeff());
  }
  const bool ok = worst_sum < 1e-12 && reduction_exact && worst_simplex < 1e-12 && worst_rescale < 1e-12;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "max |sum_j p - 1| " + fmt(worst_sum, 3) + "; D=1 reduction " + (reduction_exact ? "exact" : "inexact") +
              "; simplex error " + fmt(worst_simplex, 3) + "; rescaling error " + fmt(worst_rescale, 3)};
}

// ---- 3: auxiliary inverse-gamma composition is half-Cauchy ----

Outcome criterion_aux_cauchy() {
  const int n = 100000;
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));  // KS, alpha = 0.01
  std::mt19937_64 rng(3);
  std::string detail;
  bool ok = true;
  for (double sigma : {0.01, 1.0, 10.0}) {
    std::vector<double> xs(n);
    for (double& x : xs) x = halfcauchy_aux_sample(sigma, rng);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int k = 0; k < n; ++k) {
      const double cdf = 2.0 / M_PI * std::atan(xs[static_cast<std::size_t>(k)] / sigma);
      d = std::max({d, (k + 1.0) / n - cdf, cdf - static_cast<double>(k) / n});
    }
    ok = ok && d < critical;
    detail += "sigma=" + fmt(sigma) + " D=" + fmt(d, 3) + "; ";
  }
  return {ok ? Outcome::Pass : Outcome::Fail, detail + "critical " + fmt(critical, 3)};
}

// ---- 4: WAIC arithmetic ----

Outcome criterion_waic() {
  double worst = 0.0;
  Eigen::MatrixXd row(1, 2);
  row << std::log(0.2), std::log(0.8);
  const double hand_pwaic = std::pow(std::log(0.8) - std::log(0.2), 2) / 2.0;
  worst = std::max(worst, std::abs(pwaic(row) - 0.96091) - 5e-6);  // quoted to five places
  worst = std::max(worst, std::abs(pwaic(row) - hand_pwaic));
  worst = std::max(worst, std::abs(lppd(row) - std::log(0.5)));

  Eigen::MatrixXd two(2, 2);
  two << std::log(0.2), std::log(0.8), std::log(0.5), std::log(0.5);
  const double hand_lppd = std::log(0.5) + std::log(0.5);
  const double hand_waic = -2.0 * (hand_lppd - hand_pwaic);
  const WaicReport r = waic(two);
  worst = std::max({worst, std::abs(r.lppd - hand_lppd), std::abs(r.pwaic - hand_pwaic), std::abs(r.waic - hand_waic)});
  const double e0 = std::log(0.5) - hand_pwaic, e1 = std::log(0.5);
  const double hand_se = std::sqrt(2.0 * (e0 - e1) * (e0 - e1) / 2.0);
  worst = std::max(worst, std::abs(r.se - hand_se));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(-3.0, 1.5);
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd m(2 + t % 40, 2 + (7 * t) % 60);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
    const testing::oracle::WaicValues o = testing::oracle::waic_direct(m);
    const WaicReport w = waic(m);
    worst = std::max({worst, std::abs(w.lppd - o.lppd), std::abs(w.pwaic - o.pwaic), std::abs(w.waic - o.waic),
                      std::abs(w.se - o.se)});
  }
  return {worst < 1e-10 ? Outcome::Pass : Outcome::Fail,
          "max deviation from hand arithmetic and direct summation " + fmt(worst, 3) + " (threshold 1e-10)"};
}

// ---- 5 & 7: sparse recovery and encoder consistency ----

FitConfig recovery_config(int dims, long iterations) {
  FitConfig c;  // prior hyperparameters left at their defaults: eta0 = xi0 = 0.01, kappa0 = 0.01 * 0.1^d, nu = 1
  c.dims = dims;
  c.mc_samples = 1;
  c.schedule = StepSchedule{0.02, 0.5, static_cast<double>(iterations) / 3.0, 1e-4};
  c.max_iterations = iterations;
  c.tolerance = 0.0;
  c.seed = 11;
  return c;
}

struct Simulated {
  sim::TruthSpec spec;
  ModelParams<double> truth;
  ResponseMatrix data;
};

Simulated simulate(int persons, int items, int dims, int categories, std::uint64_t seed) {
  Simulated s;
  s.spec.persons = persons;
  s.spec.items = items;
  s.spec.dims = dims;
  s.spec.categories = categories;
  s.spec.seed = seed;
  std::mt19937_64 rng(seed);
  s.truth = sim::make_sparse_truth(s.spec, rng);
  s.data = sim::sample_responses(s.truth, Eigen::VectorXi::Constant(items, categories), rng);
  return s;
}

struct Matching {
  std::vector<int> perm;  // fitted dimension matched to each true dimension
  double accuracy = 0.0;
  std::vector<double> correlations;
};

Matching match_dimensions(const Eigen::MatrixXd& weights, const std::vector<int>& assignment,
                          const Eigen::MatrixXd& fitted_traits, const Eigen::MatrixXd& true_traits) {
  const int D = static_cast<int>(true_traits.cols());
  std::vector<int> perm(static_cast<std::size_t>(D));
  std::iota(perm.begin(), perm.end(), 0);
  Matching best;
  best.accuracy = -1.0;
  double best_corr = -1e9;
  do {
    int hits = 0;
    for (int i = 0; i < weights.rows(); ++i) {
      Eigen::Index arg = 0;
      weights.row(i).maxCoeff(&arg);
      if (static_cast<int>(arg) == perm[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])]) ++hits;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(weights.rows());
    std::vector<double> corr;
    double total = 0.0;
    for (int d = 0; d < D; ++d) {
      corr.push_back(correlation(fitted_traits.col(perm[static_cast<std::size_t>(d)]), true_traits.col(d)));
      total += corr.back();
    }
    if (acc > best.accuracy || (acc == best.accuracy && total > best_corr)) {
      best = {perm, acc, corr};
      best_corr = total;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct RecoveryRun {
  Simulated sim;
  FitResult fit;
  Matching matching;
  double seconds = 0.0;
};

RecoveryRun& recovery_run() {
  static RecoveryRun run = [] {
    RecoveryRun r;
    const auto start = std::chrono::steady_clock::now();
    r.sim = simulate(1000, 20, 2, 5, 5);
    r.fit = fit(r.sim.data, recovery_config(2, 1000));
    std::mt19937_64 rng(55);
    const Eigen::MatrixXd w = expected_domain_weights(sample_posterior(r.fit.posterior, 200, rng), 1.0);
    r.matching = match_dimensions(w, r.sim.spec.resolved_assignment(), posterior_mean(r.fit.posterior).traits,
                                  r.sim.truth.traits);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }();
  return run;
}

Outcome criterion_recovery() {
  const RecoveryRun& r = recovery_run();
  const auto& c = r.matching.correlations;
  const bool ok = r.matching.accuracy >= 0.9 && *std::min_element(c.begin(), c.end()) >= 0.8;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "assignment recovered for " + fmt(100.0 * r.matching.accuracy, 3) + "% of items (>= 90%); trait correlations " +
              fmt(c[0], 3) + ", " + fmt(c[1], 3) + " (>= 0.8); P=1000 I=20 D=2 J=5, " + fmt(r.seconds, 3) + " s"};
}

Outcome criterion_encoder() {
  const RecoveryRun& r = recovery_run();
  const int P = r.sim.data.persons();
  std::vector<int> order(static_cast<std::size_t>(P));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(77);
  std::shuffle(order.begin(), order.end(), rng);
  const int held = P / 5;
  std::vector<int> test(order.begin(), order.begin() + held), train(order.begin() + held, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());

  const Eigen::MatrixXd targets = posterior_mean(r.fit.posterior).traits;
  Eigen::MatrixXd train_targets(static_cast<Eigen::Index>(train.size()), targets.cols());
  for (std::size_t k = 0; k < train.size(); ++k) train_targets.row(static_cast<Eigen::Index>(k)) = targets.row(train[k]);
  const nn::TrainedEncoder enc =
      nn::train_encoder(r.sim.data.select_persons(train), train_targets, nn::EncoderConfig{}, rng);
  const Eigen::MatrixXd scores = nn::score(enc.net, r.sim.data.select_persons(test));

  bool ok = enc.report.best_validation_mse < 0.05 * enc.report.validation_target_variance;
  std::string detail;
  for (int d = 0; d < targets.cols(); ++d) {
    const int f = r.matching.perm[static_cast<std::size_t>(d)];
    Eigen::VectorXd truth(held), decoder(held), encoder(held);
    for (int k = 0; k < held; ++k) {
      truth[k] = r.sim.truth.traits(test[static_cast<std::size_t>(k)], d);
      decoder[k] = targets(test[static_cast<std::size_t>(k)], f);
      encoder[k] = scores(k, f);
    }
    const double ce = correlation(encoder, truth), cd = correlation(decoder, truth);
    ok = ok && std::abs(ce - cd) <= 0.05;
    detail += "dim " + std::to_string(d + 1) + ": encoder r=" + fmt(ce, 3) + " decoder r=" + fmt(cd, 3) + "; ";
  }
  return {ok ? Outcome::Pass : Outcome::Fail,
          detail + "validation MSE " + fmt(enc.report.best_validation_mse, 3) + " vs 0.05 Var(targets) = " +
              fmt(0.05 * enc.report.validation_target_variance, 3) + " (" + std::to_string(held) + " held out)"};
}

// ---- 6: dimensionality selection ----

Outcome criterion_dimensionality() {
  int wins = 0, within = 0;
  std::string detail;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const Simulated s = simulate(500, 20, 2, 5, 100 + rep);
    std::vector<WaicReport> reports;
    for (int D = 1; D <= 3; ++D) {
      const FitResult f = fit(s.data, recovery_config(D, 1000));
      std::mt19937_64 rng(200 + rep);
      reports.push_back(waic(pointwise_loglik(sample_posterior(f.posterior, 200, rng), s.data)));
    }
    if (reports[1].waic < reports[0].waic) ++wins;
    const Comparison c = compare({reports[1], reports[2]}, {"D=2", "D=3"});
    if (c.pairs.front().within_one_se) ++within;
    detail += "[" + fmt(reports[0].waic, 6) + ", " + fmt(reports[1].waic, 6) + ", " + fmt(reports[2].waic, 6) + "] ";
  }
  return {wins >= 4 ? Outcome::Pass : Outcome::Fail,
          "WAIC(D=2) < WAIC(D=1) in " + std::to_string(wins) + "/5 replications (>= 4); D=2 vs D=3 within one se in " +
              std::to_string(within) + "/5; WAIC for D=1,2,3: " + detail};
}

// ---- 8: RWA dataset, when provided ----

Outcome criterion_rwa() {
  const char* path = std::getenv("IRT_RWA_DATA");
  if (path == nullptr || *path == '\0') return {Outcome::Skip, "set IRT_RWA_DATA to a 22-item, 9-category response CSV"};
  io::ResponseFormat format;
  format.categories = 9;
  const char* token = std::getenv("IRT_RWA_MISSING");
  if (token != nullptr) format.missing_token = token;
  const ResponseMatrix data = io::load_responses(path, format);
  if (data.items() != 22) return {Outcome::Fail, "expected 22 items, found " + std::to_string(data.items())};
  const FitResult f = fit(data, recovery_config(2, 3000));
  std::mt19937_64 rng(8);
  const WaicReport r = waic(pointwise_loglik(sample_posterior(f.posterior, 1000, rng), data));
  const double reported = 5.67e5, reported_se = 0.025e5;
  const bool ok = std::abs(r.waic - reported) <= 3.0 * reported_se;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "WAIC(D=2) " + fmt(r.waic, 7) + " (se " + fmt(r.se, 4) + ") vs reported 5.67e5 +/- 3 x 2500; P=" +
              std::to_string(data.persons())};
}

// ---- 9: CLI determinism ----

std::string slurp(const fs::path& p) { return io::read_text(p); }

int run_cli(const fs::path& dir, const std::string& command) {
  const std::string line = "cd \"" + dir.string() + "\" && \"" + std::string(IRT_CLI_PATH) + "\" " + command +
                           " --config run.json --threads 1 > /dev/null 2>&1";
  return std::system(line.c_str());
}

Outcome criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / ("irt_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string config = R"({
  "data": "out/responses.csv",
  "dims": [1, 2],
  "seed": 21,
  "out": "out",
  "simulate": {"persons": 300, "items": 10, "dims": 2, "categories": 4, "missing_rate": 0.05},
  "factorize": {"dims": 2},
  "fit": {"max_iterations": 300, "mc_samples": 2, "step_size": 0.02, "decay_interval": 100, "tolerance": 0},
  "waic": {"samples": 100, "fits": ["out/fit_d1.json", "out/fit_d2.json"]},
  "encoder": {"fit": "out/fit_d2.json", "max_epochs": 40},
  "score": {"encoder": "out/encoder.json", "fit": "out/fit_d2.json", "data": "out/responses.csv"}
}
)";
  const std::vector<std::string> commands{"simulate", "factorize", "fit", "waic", "train-encoder", "score"};
  for (const char* name : {"a", "b"}) {
    fs::create_directories(root / name);
    io::write_text(root / name / "run.json", config);
    for (const std::string& c : commands) {
      if (run_cli(root / name, c) != 0) {
        return {Outcome::Fail, "irt " + c + " failed in run " + name};
      }
    }
  }
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(root / "a" / "out")) files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  std::vector<std::string> differing;
  for (const std::string& f : files) {
    if (!fs::exists(root / "b" / "out" / f) || slurp(root / "a" / "out" / f) != slurp(root / "b" / "out" / f)) {
      differing.push_back(f);
    }
  }
  fs::remove_all(root);
  if (!differing.empty()) return {Outcome::Fail, "differing outputs: " + differing.front() + " and " +
                                                     std::to_string(differing.size() - 1) + " more"};
  return {Outcome::Pass, std::to_string(commands.size()) + " commands, " + std::to_string(files.size()) +
                             " output files byte-identical across two runs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient suite", criterion_gradients},
      {"2 likelihood properties", criterion_likelihood},
      {"3 auxiliary half-Cauchy", criterion_aux_cauchy},
      {"4 WAIC oracle", criterion_waic},
      {"5 sparse recovery", criterion_recovery},
      {"6 dimensionality selection", criterion_dimensionality},
      {"7 encoder consistency", criterion_encoder},
      {"8 RWA WAIC", criterion_rwa},
      {"9 CLI determinism", criterion_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Fail ? "FAIL" : "SKIP";
    if (o.kind == Outcome::Fail) ++failures;
    std::cout << tag << " criterion " << name << ": " << o.detail << " [" << fmt(seconds, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
