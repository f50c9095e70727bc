#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "irt/grm/model.hpp"

namespace irt::sim {

/// Ground-truth recipe. Each item loads on exactly one dimension.
struct TruthSpec {
  int persons = 500;
  int items = 20;
  int dims = 2;
  int categories = 5;
  std::vector<int> assignment;  // 0-based dimension per item; empty = contiguous blocks
  double lambda_min = 1.0;
  double lambda_max = 2.5;
  double threshold_spacing = 0.0;  // 0 = 2 / (J - 1)
  double location_sd = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  /// The explicit assignment, or contiguous blocks of ceil(I / D) items per dimension.
  std::vector<int> resolved_assignment() const;
};

ModelParams<double> make_sparse_truth(const TruthSpec& spec, std::mt19937_64& rng);

/// Draws X_pi from the mixture category distribution of every cell. Each
/// person uses its own generator seeded from one draw of `rng` and the person
/// index. Cells are masked as missing with probability `missing_rate`.
ResponseMatrix sample_responses(const ModelParams<double>& truth, const Eigen::VectorXi& categories,
                                std::mt19937_64& rng, double nu = 1.0, double missing_rate = 0.0);

/// Category probabilities of the mixture for one cell (length J).
Eigen::VectorXd mixture_category_probs(const ModelParams<double>& params, int person, int item, double nu);

}  // namespace irt::sim
