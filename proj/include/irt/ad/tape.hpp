#pragma once

// Reverse-mode automatic differentiation on a scalar tape.
//
// Every node stores its forward value together with the local partial
// derivative with respect to each operand, computed when the node is
// recorded. The reverse sweep is then a single pass of adjoint
// accumulation in reverse topological (recording) order.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "irt/errors.hpp"

namespace irt::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Log1p,
  Expm1,
  Sigmoid,
  LogSigmoid,
  Tanh,
  Square,
  Sqrt,
  Min,
  Max,
  LogSumExp,
  Sum,
  Dot,
  Precomputed,
};

std::string_view op_name(OpKind kind);

class Tape;

/// A scalar that is either a constant or a node on a tape.
class Var {
 public:
  static constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit constants keep formulas readable

  double value() const { return value_; }
  bool is_constant() const { return tape_ == nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = kConstant;
  double value_ = 0.0;
};

using GradientVector = Eigen::VectorXd;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New independent variable. Gradients are reported in leaf creation order.
  Var variable(double value);

  /// Records a node whose local partials were computed by the caller.
  /// Constant operands are dropped; if every operand is constant the result
  /// is a constant too.
  Var push(OpKind kind, double value, std::span<const Var> operands,
           std::span<const double> partials);
  Var push_unary(OpKind kind, double value, const Var& a, double da);
  Var push_binary(OpKind kind, double value, const Var& a, double da, const Var& b, double db);

  /// Reverse sweep from `output`; returns d output / d leaf for every leaf.
  GradientVector gradient(const Var& output) const;

  /// Reverse sweep that adds `seed * d output / d leaf` into `accumulator`.
  void accumulate_gradient(const Var& output, double seed, Eigen::Ref<Eigen::VectorXd> accumulator) const;

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_leaves() const { return leaves_.size(); }
  OpKind kind(std::size_t node) const { return nodes_.at(node).kind; }
  double value(std::size_t node) const { return nodes_.at(node).value; }
  std::span<const std::uint32_t> operands(std::size_t node) const;

  /// Drops all nodes but keeps allocated storage for reuse.
  void clear();

 private:
  struct Node {
    OpKind kind;
    std::uint32_t begin;
    std::uint32_t count;
    double value;
  };

  void check_owned(const Var& v) const;
  void sweep(const Var& output, double seed) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> operand_index_;
  std::vector<double> operand_partial_;
  std::vector<std::uint32_t> leaves_;
  mutable std::vector<double> adjoint_;
};

// Tape lookup for operand lists; throws ContractError when two tapes mix.
Tape* common_tape(std::span<const Var> operands);

// Elementary operations. Each records one node.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

// Comparisons look at forward values only; they never record.
inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }

Var exp(const Var& x);
Var log(const Var& x);
Var log1p(const Var& x);
Var expm1(const Var& x);
Var sigmoid(const Var& x);
Var log_sigmoid(const Var& x);
Var tanh(const Var& x);
Var square(const Var& x);
Var sqrt(const Var& x);
/// Ties take the first operand's branch.
Var min(const Var& a, const Var& b);
Var max(const Var& a, const Var& b);
Var log_sum_exp(const Var& a, const Var& b);
Var log_sum_exp(std::span<const Var> xs);
Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);
Var dot(std::span<const Var> a, std::span<const double> b);

/// Node with caller-supplied value and partials (a fused sub-expression).
Var precomputed(double value, std::span<const Var> operands, std::span<const double> partials);

// Double overloads so generic code can call the same names for both scalars.
inline double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}
inline double square(double x) { return x * x; }
inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) {
    return m;
  }
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

/// Result of recording a scalar function at a point.
struct Recording {
  std::unique_ptr<Tape> tape;
  std::vector<Var> inputs;
  Var output;

  double value() const { return output.value(); }
};

using ScalarFunction = std::function<Var(std::span<const Var>)>;

Recording record(const ScalarFunction& f, std::span<const double> point);

/// Gradient of a recording's output with respect to its inputs.
GradientVector backward(const Recording& recording);

/// max_k |autodiff_k - central_k| / (|central_k| + 1e-12).
double check_gradients(const ScalarFunction& f, std::span<const double> point, double step);

}  // namespace irt::ad

namespace Eigen {

template <>
struct NumTraits<irt::ad::Var> : NumTraits<double> {
  using Real = irt::ad::Var;
  using NonInteger = irt::ad::Var;
  using Nested = irt::ad::Var;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 2,
    MulCost = 2,
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<irt::ad::Var, double, BinaryOp> {
  using ReturnType = irt::ad::Var;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, irt::ad::Var, BinaryOp> {
  using ReturnType = irt::ad::Var;
};

}  // namespace Eigen
