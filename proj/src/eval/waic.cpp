#include "irt/eval/waic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace irt {

PointwiseLogLik pointwise_loglik(const PosteriorDraws& draws, const ResponseMatrix& data, double nu,
                                 int threads) {
  if (draws.size() < 2) {
    throw ContractError("at least 2 posterior draws are required");
  }
  for (const ModelParams<double>& draw : draws) {
    check_shape(draw, data);
  }
  const auto S = static_cast<Eigen::Index>(draws.size());
  PointwiseLogLik out(data.persons(), S);
  auto work = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index s = begin; s < end; ++s) {
      for (int p = 0; p < data.persons(); ++p) {
        out(p, s) = person_loglik(draws[static_cast<std::size_t>(s)], data, p, nu);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(S)));
  if (workers == 1) {
    work(0, S);
    return out;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (S + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index end = std::min(S, begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  for (auto& t : pool) t.join();
  return out;
}

Eigen::VectorXd lppd_by_person(const PointwiseLogLik& matrix) {
  if (matrix.cols() < 1) {
    throw ContractError("pointwise matrix has no draws");
  }
  const double log_s = std::log(static_cast<double>(matrix.cols()));
  Eigen::VectorXd out(matrix.rows());
  for (Eigen::Index p = 0; p < matrix.rows(); ++p) {
    const double m = matrix.row(p).maxCoeff();
    out[p] = m + std::log((matrix.row(p).array() - m).exp().sum()) - log_s;
  }
  return out;
}

Eigen::VectorXd pwaic_by_person(const PointwiseLogLik& matrix) {
  if (matrix.cols() < 2) {
    throw ContractError("pwaic needs at least 2 draws");
  }
  const double denom = static_cast<double>(matrix.cols() - 1);
  Eigen::VectorXd out(matrix.rows());
  for (Eigen::Index p = 0; p < matrix.rows(); ++p) {
    const double mean = matrix.row(p).mean();
    out[p] = (matrix.row(p).array() - mean).square().sum() / denom;
  }
  return out;
}

double lppd(const PointwiseLogLik& matrix) { return lppd_by_person(matrix).sum(); }

double pwaic(const PointwiseLogLik& matrix) { return pwaic_by_person(matrix).sum(); }

WaicReport waic(const PointwiseLogLik& matrix) {
  if (matrix.rows() < 2) {
    throw ContractError("the WAIC standard error needs at least 2 persons");
  }
  WaicReport r;
  const Eigen::VectorXd l = lppd_by_person(matrix);
  const Eigen::VectorXd v = pwaic_by_person(matrix);
  r.persons = static_cast<int>(matrix.rows());
  r.samples = static_cast<int>(matrix.cols());
  r.lppd = l.sum();
  r.pwaic = v.sum();
  r.elpd = r.lppd - r.pwaic;
  r.waic = -2.0 * (r.lppd - r.pwaic);
  r.pointwise = l - v;
  const double mean = r.pointwise.mean();
  const double var = (r.pointwise.array() - mean).square().sum() / static_cast<double>(r.persons - 1);
  r.se = std::sqrt(static_cast<double>(r.persons) * var);
  return r;
}

Comparison compare(const std::vector<WaicReport>& reports, const std::vector<std::string>& labels) {
  if (reports.size() < 2) {
    throw ContractError("comparison needs at least 2 reports");
  }
  if (labels.size() != reports.size()) {
    throw ContractError("one label per report is required");
  }
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return reports[a].waic < reports[b].waic; });
  Comparison out;
  for (std::size_t k : order) out.ranking.push_back({labels[k], reports[k]});
  for (std::size_t a = 0; a < out.ranking.size(); ++a) {
    for (std::size_t b = a + 1; b < out.ranking.size(); ++b) {
      const WaicReport& x = out.ranking[a].report;
      const WaicReport& y = out.ranking[b].report;
      const double diff = y.waic - x.waic;
      out.pairs.push_back({out.ranking[a].label, out.ranking[b].label, diff, diff < std::max(x.se, y.se)});
    }
  }
  return out;
}

}  // namespace irt
