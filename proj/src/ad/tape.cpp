#include "irt/ad/tape.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace irt::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Neg: return "neg";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Log1p: return "log1p";
    case OpKind::Expm1: return "expm1";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::LogSigmoid: return "log_sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Min: return "min";
    case OpKind::Max: return "max";
    case OpKind::LogSumExp: return "log_sum_exp";
    case OpKind::Sum: return "sum";
    case OpKind::Dot: return "dot";
    case OpKind::Precomputed: return "precomputed";
  }
  return "unknown";
}

Var Tape::variable(double value) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({OpKind::Leaf, static_cast<std::uint32_t>(operand_index_.size()), 0, value});
  leaves_.push_back(index);
  return Var(this, index, value);
}

void Tape::check_owned(const Var& v) const {
  if (!v.is_constant() && v.tape() != this) {
    throw ContractError("variable belongs to a different tape");
  }
}

Var Tape::push(OpKind kind, double value, std::span<const Var> operands,
               std::span<const double> partials) {
  if (operands.size() != partials.size()) {
    throw ContractError("operand and partial counts differ");
  }
  const auto begin = static_cast<std::uint32_t>(operand_index_.size());
  for (std::size_t k = 0; k < operands.size(); ++k) {
    const Var& v = operands[k];
    if (v.is_constant()) {
      continue;
    }
    check_owned(v);
    operand_index_.push_back(v.index());
    operand_partial_.push_back(partials[k]);
  }
  const auto count = static_cast<std::uint32_t>(operand_index_.size()) - begin;
  if (count == 0) {
    return Var(value);
  }
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({kind, begin, count, value});
  return Var(this, index, value);
}

Var Tape::push_unary(OpKind kind, double value, const Var& a, double da) {
  if (a.is_constant()) {
    return Var(value);
  }
  check_owned(a);
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({kind, static_cast<std::uint32_t>(operand_index_.size()), 1, value});
  operand_index_.push_back(a.index());
  operand_partial_.push_back(da);
  return Var(this, index, value);
}

Var Tape::push_binary(OpKind kind, double value, const Var& a, double da, const Var& b, double db) {
  const std::array<Var, 2> ops{a, b};
  const std::array<double, 2> partials{da, db};
  return push(kind, value, ops, partials);
}

std::span<const std::uint32_t> Tape::operands(std::size_t node) const {
  const Node& n = nodes_.at(node);
  return {operand_index_.data() + n.begin, n.count};
}

void Tape::clear() {
  nodes_.clear();
  operand_index_.clear();
  operand_partial_.clear();
  leaves_.clear();
}

void Tape::sweep(const Var& output, double seed) const {
  adjoint_.assign(nodes_.size(), 0.0);
  adjoint_[output.index()] = seed;
  for (std::size_t k = output.index() + 1; k-- > 0;) {
    const double a = adjoint_[k];
    if (a == 0.0) {
      continue;
    }
    const Node& n = nodes_[k];
    const std::uint32_t end = n.begin + n.count;
    for (std::uint32_t o = n.begin; o < end; ++o) {
      adjoint_[operand_index_[o]] += a * operand_partial_[o];
    }
  }
}

GradientVector Tape::gradient(const Var& output) const {
  GradientVector grad = GradientVector::Zero(static_cast<Eigen::Index>(leaves_.size()));
  accumulate_gradient(output, 1.0, grad);
  return grad;
}

void Tape::accumulate_gradient(const Var& output, double seed,
                               Eigen::Ref<Eigen::VectorXd> accumulator) const {
  if (accumulator.size() != static_cast<Eigen::Index>(leaves_.size())) {
    throw ContractError("gradient accumulator length differs from leaf count");
  }
  if (output.is_constant()) {
    return;
  }
  check_owned(output);
  sweep(output, seed);
  for (std::size_t l = 0; l < leaves_.size(); ++l) {
    accumulator[static_cast<Eigen::Index>(l)] += adjoint_[leaves_[l]];
  }
}

Tape* common_tape(std::span<const Var> operands) {
  Tape* tape = nullptr;
  for (const Var& v : operands) {
    if (v.is_constant()) {
      continue;
    }
    if (tape == nullptr) {
      tape = v.tape();
    } else if (tape != v.tape()) {
      throw ContractError("operands recorded on different tapes");
    }
  }
  return tape;
}

namespace {

Var unary(OpKind kind, double value, const Var& a, double da) {
  if (a.is_constant()) {
    return Var(value);
  }
  return a.tape()->push_unary(kind, value, a, da);
}

Var binary(OpKind kind, double value, const Var& a, double da, const Var& b, double db) {
  const std::array<Var, 2> ops{a, b};
  Tape* tape = common_tape(ops);
  if (tape == nullptr) {
    return Var(value);
  }
  return tape->push_binary(kind, value, a, da, b, db);
}

std::size_t next_node(const Var& v) {
  return v.is_constant() ? std::numeric_limits<std::size_t>::max() : v.tape()->size();
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  return binary(OpKind::Add, a.value() + b.value(), a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  return binary(OpKind::Sub, a.value() - b.value(), a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  return binary(OpKind::Mul, a.value() * b.value(), a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) {
    throw DomainError("division by zero", next_node(b));
  }
  const double inv = 1.0 / b.value();
  const double q = a.value() * inv;
  return binary(OpKind::Div, q, a, inv, b, -q * inv);
}

Var operator-(const Var& a) { return unary(OpKind::Neg, -a.value(), a, -1.0); }

Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return unary(OpKind::Exp, e, x, e);
}

Var log(const Var& x) {
  if (!(x.value() > 0.0)) {
    throw DomainError("log of nonpositive value " + std::to_string(x.value()), next_node(x));
  }
  return unary(OpKind::Log, std::log(x.value()), x, 1.0 / x.value());
}

Var log1p(const Var& x) {
  if (!(x.value() > -1.0)) {
    throw DomainError("log1p of value <= -1: " + std::to_string(x.value()), next_node(x));
  }
  return unary(OpKind::Log1p, std::log1p(x.value()), x, 1.0 / (1.0 + x.value()));
}

Var expm1(const Var& x) {
  return unary(OpKind::Expm1, std::expm1(x.value()), x, std::exp(x.value()));
}

Var sigmoid(const Var& x) {
  const double s = sigmoid(x.value());
  return unary(OpKind::Sigmoid, s, x, s * (1.0 - s));
}

Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return unary(OpKind::Tanh, t, x, 1.0 - t * t);
}

Var log_sigmoid(const Var& x) {
  return unary(OpKind::LogSigmoid, log_sigmoid(x.value()), x, sigmoid(-x.value()));
}

Var square(const Var& x) {
  return unary(OpKind::Square, x.value() * x.value(), x, 2.0 * x.value());
}

Var sqrt(const Var& x) {
  if (x.value() < 0.0) {
    throw DomainError("sqrt of negative value " + std::to_string(x.value()), next_node(x));
  }
  const double r = std::sqrt(x.value());
  return unary(OpKind::Sqrt, r, x, 0.5 / r);
}

Var min(const Var& a, const Var& b) {
  const bool first = a.value() <= b.value();
  return binary(OpKind::Min, first ? a.value() : b.value(), a, first ? 1.0 : 0.0, b,
                first ? 0.0 : 1.0);
}

Var max(const Var& a, const Var& b) {
  const bool first = a.value() >= b.value();
  return binary(OpKind::Max, first ? a.value() : b.value(), a, first ? 1.0 : 0.0, b,
                first ? 0.0 : 1.0);
}

Var log_sum_exp(const Var& a, const Var& b) {
  const std::array<Var, 2> xs{a, b};
  return log_sum_exp(xs);
}

Var log_sum_exp(std::span<const Var> xs) {
  if (xs.empty()) {
    throw ContractError("log_sum_exp of an empty list");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (const Var& x : xs) {
    m = std::max(m, x.value());
  }
  if (!std::isfinite(m)) {
    throw DomainError("log_sum_exp with non-finite maximum", next_node(xs.front()));
  }
  std::vector<double> w(xs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    w[k] = std::exp(xs[k].value() - m);
    total += w[k];
  }
  for (double& wk : w) {
    wk /= total;
  }
  const double value = m + std::log(total);
  Tape* tape = common_tape(xs);
  if (tape == nullptr) {
    return Var(value);
  }
  return tape->push(OpKind::LogSumExp, value, xs, w);
}

Var sum(std::span<const Var> xs) {
  double total = 0.0;
  for (const Var& x : xs) {
    total += x.value();
  }
  Tape* tape = common_tape(xs);
  if (tape == nullptr) {
    return Var(total);
  }
  const std::vector<double> ones(xs.size(), 1.0);
  return tape->push(OpKind::Sum, total, xs, ones);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) {
    throw ContractError("dot of spans with different lengths");
  }
  std::vector<Var> ops;
  std::vector<double> partials;
  ops.reserve(2 * a.size());
  partials.reserve(2 * a.size());
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    total += a[k].value() * b[k].value();
    ops.push_back(a[k]);
    partials.push_back(b[k].value());
    ops.push_back(b[k]);
    partials.push_back(a[k].value());
  }
  Tape* tape = common_tape(ops);
  if (tape == nullptr) {
    return Var(total);
  }
  return tape->push(OpKind::Dot, total, ops, partials);
}

Var dot(std::span<const Var> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractError("dot of spans with different lengths");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    total += a[k].value() * b[k];
  }
  Tape* tape = common_tape(a);
  if (tape == nullptr) {
    return Var(total);
  }
  return tape->push(OpKind::Dot, total, a, b);
}

Var precomputed(double value, std::span<const Var> operands, std::span<const double> partials) {
  Tape* tape = common_tape(operands);
  if (tape == nullptr) {
    return Var(value);
  }
  return tape->push(OpKind::Precomputed, value, operands, partials);
}

Recording record(const ScalarFunction& f, std::span<const double> point) {
  Recording rec;
  rec.tape = std::make_unique<Tape>();
  rec.inputs.reserve(point.size());
  for (double x : point) {
    rec.inputs.push_back(rec.tape->variable(x));
  }
  rec.output = f(rec.inputs);
  if (!rec.output.is_constant() && rec.output.tape() != rec.tape.get()) {
    throw ContractError("recorded function returned a variable from another tape");
  }
  return rec;
}

GradientVector backward(const Recording& recording) {
  if (!recording.tape) {
    throw ContractError("backward on an empty recording");
  }
  return recording.tape->gradient(recording.output);
}

double check_gradients(const ScalarFunction& f, std::span<const double> point, double step) {
  if (!(step > 0.0)) {
    throw ContractError("finite-difference step must be positive");
  }
  const Recording rec = record(f, point);
  const GradientVector grad = backward(rec);

  std::vector<double> shifted(point.begin(), point.end());
  auto evaluate = [&]() {
    Tape scratch;
    std::vector<Var> xs;
    xs.reserve(shifted.size());
    for (double x : shifted) {
      xs.push_back(scratch.variable(x));
    }
    const double v = f(xs).value();
    if (!std::isfinite(v)) {
      throw NumericalError("function is not finite at a perturbed point");
    }
    return v;
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < point.size(); ++k) {
    shifted[k] = point[k] + step;
    const double up = evaluate();
    shifted[k] = point[k] - step;
    const double down = evaluate();
    shifted[k] = point[k];
    const double central = (up - down) / (2.0 * step);
    const double err = std::abs(grad[static_cast<Eigen::Index>(k)] - central) / (std::abs(central) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace irt::ad
