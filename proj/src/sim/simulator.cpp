#include "irt/sim/simulator.hpp"

namespace irt::sim {

void TruthSpec::validate() const {
  if (persons < 1 || items < 1 || dims < 1 || categories < 2) {
    throw ContractError("truth spec needs positive persons, items, dims and at least 2 categories");
  }
  if (!(lambda_min > 0.0) || lambda_max < lambda_min) {
    throw ContractError("discrimination range must satisfy 0 < min <= max");
  }
  if (threshold_spacing < 0.0 || location_sd < 0.0) {
    throw ContractError("threshold spacing and location sd must be nonnegative");
  }
  if (!assignment.empty()) {
    if (static_cast<int>(assignment.size()) != items) {
      throw ContractError("assignment plan must cover every item exactly once");
    }
    for (int d : assignment) {
      if (d < 0 || d >= dims) throw ContractError("assignment refers to a missing dimension");
    }
  }
}

std::vector<int> TruthSpec::resolved_assignment() const {
  if (!assignment.empty()) return assignment;
  std::vector<int> plan(static_cast<std::size_t>(items));
  const int block = (items + dims - 1) / dims;
  for (int i = 0; i < items; ++i) plan[static_cast<std::size_t>(i)] = std::min(i / block, dims - 1);
  return plan;
}

ModelParams<double> make_sparse_truth(const TruthSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const std::vector<int> plan = spec.resolved_assignment();
  ModelShape shape{spec.persons, spec.items, spec.dims, Eigen::VectorXi::Constant(spec.items, spec.categories)};
  ModelParams<double> truth = make_params(shape);
  std::uniform_real_distribution<double> magnitude(spec.lambda_min, spec.lambda_max);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int J = spec.categories;
  const double spacing = spec.threshold_spacing > 0.0 ? spec.threshold_spacing : 2.0 / (J - 1);

  truth.item.discrimination.setZero();
  for (int i = 0; i < spec.items; ++i) {
    truth.item.discrimination(i, plan[static_cast<std::size_t>(i)]) = magnitude(rng);
    for (int d = 0; d < spec.dims; ++d) {
      const double mu = spec.location_sd * normal(rng);
      truth.item.location(i, d) = mu;
      Eigen::MatrixXd& tau = truth.item.thresholds[static_cast<std::size_t>(i)];
      for (int k = 0; k < J - 1; ++k) {
        tau(k, d) = mu + spacing * (k - 0.5 * (J - 2));
      }
    }
  }
  for (Eigen::Index k = 0; k < truth.traits.size(); ++k) {
    truth.traits.data()[k] = normal(rng);
  }
  check_invariants(truth);
  return truth;
}

Eigen::VectorXd mixture_category_probs(const ModelParams<double>& params, int person, int item, double nu) {
  const Eigen::MatrixXd& tau = params.item.thresholds[static_cast<std::size_t>(item)];
  const int J = static_cast<int>(tau.rows()) + 1;
  const Eigen::VectorXd w = domain_weights<double>(params.item.discrimination.row(item), nu);
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(J);
  for (int d = 0; d < params.dims(); ++d) {
    if (w[d] == 0.0) continue;
    for (int j = 1; j <= J; ++j) {
      probs[j - 1] += w[d] * grm_cat_prob(params.traits(person, d), params.item.discrimination(item, d),
                                          tau.col(d), j);
    }
  }
  return probs;
}

ResponseMatrix sample_responses(const ModelParams<double>& truth, const Eigen::VectorXi& categories,
                                std::mt19937_64& rng, double nu, double missing_rate) {
  check_invariants(truth);
  if (categories.size() != truth.items()) {
    throw ContractError("category counts must match the item count");
  }
  for (int i = 0; i < truth.items(); ++i) {
    if (truth.item.thresholds[static_cast<std::size_t>(i)].rows() != categories[i] - 1) {
      throw ContractError("threshold count does not match the category count");
    }
  }
  if (missing_rate < 0.0 || missing_rate >= 1.0) {
    throw ContractError("missing rate must lie in [0, 1)");
  }
  const std::uint64_t base = rng();
  Eigen::MatrixXi codes(truth.persons(), truth.items());
  for (int p = 0; p < truth.persons(); ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(p)};
    std::mt19937_64 row_rng(seq);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int i = 0; i < truth.items(); ++i) {
      const Eigen::VectorXd probs = mixture_category_probs(truth, p, i, nu);
      const double u = uniform(row_rng);
      int code = static_cast<int>(probs.size());
      double cumulative = 0.0;
      for (Eigen::Index j = 0; j < probs.size(); ++j) {
        cumulative += probs[j];
        if (u < cumulative) {
          code = static_cast<int>(j) + 1;
          break;
        }
      }
      const bool masked = missing_rate > 0.0 && uniform(row_rng) < missing_rate;
      codes(p, i) = masked ? ResponseMatrix::kMissing : code;
    }
  }
  return ResponseMatrix(std::move(codes), categories);
}

}  // namespace irt::sim
