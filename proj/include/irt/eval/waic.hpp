#pragma once

// WAIC with persons as the exchangeable units.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "irt/advi/variational.hpp"
#include "irt/grm/model.hpp"

namespace irt {

/// P x S matrix; entry (p, s) = log Pr(X_p | draw s) over person p's observed items.
using PointwiseLogLik = Eigen::MatrixXd;

PointwiseLogLik pointwise_loglik(const PosteriorDraws& draws, const ResponseMatrix& data, double nu = 1.0,
                                 int threads = 1);

/// Per-person log of the draw-averaged likelihood.
Eigen::VectorXd lppd_by_person(const PointwiseLogLik& matrix);
/// Per-person sample variance over draws (divisor S - 1).
Eigen::VectorXd pwaic_by_person(const PointwiseLogLik& matrix);

double lppd(const PointwiseLogLik& matrix);
double pwaic(const PointwiseLogLik& matrix);

struct WaicReport {
  double lppd = 0.0;
  double pwaic = 0.0;
  double elpd = 0.0;   // lppd - pwaic
  double waic = 0.0;   // -2 elpd
  double se = 0.0;     // sqrt(P * Var_p(elpd_p)), divisor P - 1
  Eigen::VectorXd pointwise;  // elpd_p = lppd_p - pwaic_p
  int persons = 0;
  int samples = 0;
};

WaicReport waic(const PointwiseLogLik& matrix);

struct RankedModel {
  std::string label;
  WaicReport report;
};

struct PairFlag {
  std::string first;
  std::string second;
  double difference = 0.0;   // waic(second) - waic(first) >= 0
  bool within_one_se = false;
};

struct Comparison {
  std::vector<RankedModel> ranking;  // ascending WAIC, ties in input order
  std::vector<PairFlag> pairs;       // every pair, in ranking order
};

/// Ranks models by WAIC and flags pairs whose difference is below the
/// standard error of either member.
Comparison compare(const std::vector<WaicReport>& reports, const std::vector<std::string>& labels);

}  // namespace irt
