#include <cmath>
#include <random>

#include "doctest.h"
#include "irt/sim/simulator.hpp"

using namespace irt;
using namespace irt::sim;

TEST_CASE("truth spec validation and assignment plans") {
  TruthSpec spec;
  spec.items = 5;
  spec.dims = 2;
  CHECK(spec.resolved_assignment() == std::vector<int>{0, 0, 0, 1, 1});
  spec.assignment = {1, 1, 0, 0, 1};
  CHECK(spec.resolved_assignment() == spec.assignment);
  spec.assignment = {1, 2, 0, 0, 1};
  CHECK_THROWS_AS(spec.validate(), ContractError);
  spec.assignment.clear();
  spec.categories = 1;
  CHECK_THROWS_AS(spec.validate(), ContractError);
}

TEST_CASE("sparse truth has one nonzero discrimination per item") {
  TruthSpec spec;
  spec.persons = 50;
  spec.items = 8;
  spec.dims = 3;
  std::mt19937_64 rng(2);
  const ModelParams<double> truth = make_sparse_truth(spec, rng);
  CHECK(satisfies_invariants(truth));
  const std::vector<int> plan = spec.resolved_assignment();
  for (int i = 0; i < 8; ++i) {
    for (int d = 0; d < 3; ++d) {
      const double l = truth.item.discrimination(i, d);
      if (d == plan[static_cast<std::size_t>(i)]) {
        CHECK(l >= 1.0);
        CHECK(l <= 2.5);
      } else {
        CHECK(l == 0.0);
      }
    }
    CHECK(truth.item.thresholds[static_cast<std::size_t>(i)].rows() == 4);
  }
}

TEST_CASE("large discrimination saturates the category distribution") {
  ModelShape shape{1, 1, 1, Eigen::VectorXi::Constant(1, 3)};
  ModelParams<double> p = make_params(shape);
  p.item.discrimination(0, 0) = 50.0;
  p.item.thresholds[0].col(0) << -1.0, 1.0;
  p.traits(0, 0) = 0.0;
  const Eigen::VectorXd probs = mixture_category_probs(p, 0, 0, 1.0);
  CHECK(probs[1] > 1.0 - 1e-12);
  std::mt19937_64 rng(1);
  ModelParams<double> many = p;
  many.traits = Eigen::MatrixXd::Zero(100, 1);
  const ResponseMatrix r = sample_responses(many, Eigen::VectorXi::Constant(1, 3), rng);
  CHECK((r.codes().array() == 2).all());
}

TEST_CASE("simulated category frequencies match the mixture probabilities") {
  ModelShape shape{20000, 1, 2, Eigen::VectorXi::Constant(1, 4)};
  ModelParams<double> p = make_params(shape);
  p.item.discrimination.row(0) << 1.0, 3.0;
  p.item.thresholds[0].col(0) << -1.0, 0.0, 1.0;
  p.item.thresholds[0].col(1) << -0.5, 0.2, 0.4;
  p.traits.col(0).setConstant(0.3);
  p.traits.col(1).setConstant(-0.2);
  const Eigen::VectorXd probs = mixture_category_probs(p, 0, 0, 1.0);
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(8);
  const ResponseMatrix r = sample_responses(p, shape.categories, rng);
  for (int j = 1; j <= 4; ++j) {
    const double freq = (r.codes().array() == j).cast<double>().mean();
    const double se = std::sqrt(probs[j - 1] * (1.0 - probs[j - 1]) / 20000.0);
    CHECK(std::abs(freq - probs[j - 1]) < 4.0 * se);
  }
}

TEST_CASE("simulation is deterministic and supports missingness") {
  TruthSpec spec;
  spec.persons = 300;
  std::mt19937_64 a(11), b(11);
  const auto ta = make_sparse_truth(spec, a);
  const auto tb = make_sparse_truth(spec, b);
  CHECK(ta.traits == tb.traits);
  const Eigen::VectorXi cats = Eigen::VectorXi::Constant(spec.items, spec.categories);
  const ResponseMatrix ra = sample_responses(ta, cats, a, 1.0, 0.2);
  const ResponseMatrix rb = sample_responses(tb, cats, b, 1.0, 0.2);
  CHECK(ra.codes() == rb.codes());
  const double missing = (ra.codes().array() == 0).cast<double>().mean();
  CHECK(missing == doctest::Approx(0.2).epsilon(0.15));
  CHECK_THROWS_AS(sample_responses(ta, cats, a, 1.0, 1.0), ContractError);
  CHECK_THROWS_AS(sample_responses(ta, Eigen::VectorXi::Constant(spec.items, 3), a), ContractError);
}
