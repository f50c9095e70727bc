#pragma once

// Bijections between the unconstrained coordinate vector optimized by ADVI
// and the constrained model parameters.
//
// Coordinate layout, in order:
//   traits          P*D   identity   (column-major, like the Eigen matrix)
//   discrimination  I*D   log
//   location        I*D   identity
//   thresholds      per item i, per dimension d: J_i - 1 coordinates, ordered
//   eta             I     log
//   xi              I*D   log
//   kappa           D     log
// An ordered segment maps (u_0, u_1, ...) to (u_0, u_0 + e^{u_1}, ...).

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irt/grm/model.hpp"

namespace irt {

enum class TransformKind { Identity, Log, Ordered };

std::string to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& name);

struct TransformSegment {
  std::string block;
  TransformKind kind;
  Eigen::Index offset;
  Eigen::Index length;

  friend bool operator==(const TransformSegment&, const TransformSegment&) = default;
};

class TransformSpec {
 public:
  TransformSpec() = default;

  /// Layout for the GRM parameter blocks of `shape`.
  static TransformSpec build(const ModelShape& shape);

  /// A single identity segment of length n, for models defined directly on R^n.
  static TransformSpec identity(Eigen::Index n);

  Eigen::Index size() const { return size_; }
  const ModelShape& shape() const { return shape_; }
  const std::vector<TransformSegment>& segments() const { return segments_; }
  bool has_model_layout() const { return shape_.items > 0; }

  /// Applies every segment transform elementwise; adds the log-Jacobian to
  /// `log_jacobian` when given.
  template <typename Scalar>
  std::vector<Scalar> forward(std::span<const Scalar> u, Scalar* log_jacobian) const;

  /// Inverse of forward. Throws ContractError for out-of-domain values.
  Eigen::VectorXd inverse(std::span<const double> x) const;

  /// Unconstrained coordinates -> model parameters.
  template <typename Scalar>
  ModelParams<Scalar> constrain(std::span<const Scalar> u, Scalar* log_jacobian) const;

  /// Model parameters -> unconstrained coordinates.
  Eigen::VectorXd unconstrain(const ModelParams<double>& params) const;

  /// Constrained values flattened in coordinate order.
  std::vector<double> flatten(const ModelParams<double>& params) const;

  const TransformSegment& segment(const std::string& block) const;

  friend bool operator==(const TransformSpec& a, const TransformSpec& b) {
    return a.shape_ == b.shape_ && a.segments_ == b.segments_ && a.size_ == b.size_;
  }

 private:
  void add(std::string block, TransformKind kind, Eigen::Index length);
  void check_length(std::size_t n) const;

  ModelShape shape_;
  std::vector<TransformSegment> segments_;
  Eigen::Index size_ = 0;
};

template <typename Scalar>
std::vector<Scalar> TransformSpec::forward(std::span<const Scalar> u, Scalar* log_jacobian) const {
  using std::exp;
  check_length(u.size());
  std::vector<Scalar> x(u.begin(), u.end());
  std::vector<Scalar> jac_terms;
  for (const TransformSegment& seg : segments_) {
    const auto begin = static_cast<std::size_t>(seg.offset);
    const auto end = begin + static_cast<std::size_t>(seg.length);
    switch (seg.kind) {
      case TransformKind::Identity:
        break;
      case TransformKind::Log:
        for (std::size_t k = begin; k < end; ++k) {
          x[k] = exp(u[k]);
          jac_terms.push_back(u[k]);
        }
        break;
      case TransformKind::Ordered:
        for (std::size_t k = begin + 1; k < end; ++k) {
          x[k] = x[k - 1] + exp(u[k]);
          jac_terms.push_back(u[k]);
        }
        break;
    }
  }
  if (log_jacobian != nullptr) {
    *log_jacobian = detail::sum_terms(std::span<const Scalar>(jac_terms));
  }
  return x;
}

template <typename Scalar>
ModelParams<Scalar> TransformSpec::constrain(std::span<const Scalar> u, Scalar* log_jacobian) const {
  if (!has_model_layout()) {
    throw ContractError("transform has no model layout");
  }
  const std::vector<Scalar> x = forward(u, log_jacobian);
  const int P = shape_.persons;
  const int I = shape_.items;
  const int D = shape_.dims;
  std::size_t k = 0;
  auto fill = [&](auto& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index c = 0; c < m.size(); ++c) m.data()[c] = x[k++];
  };
  ModelParams<Scalar> params;
  fill(params.traits, P, D);
  fill(params.item.discrimination, I, D);
  fill(params.item.location, I, D);
  params.item.thresholds.resize(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    fill(params.item.thresholds[static_cast<std::size_t>(i)], shape_.categories[i] - 1, D);
  }
  fill(params.scales.item, I, 1);
  fill(params.scales.local, I, D);
  fill(params.scales.dimension, D, 1);
  return params;
}

}  // namespace irt
