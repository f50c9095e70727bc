#pragma once

#include <stdexcept>
#include <string>

namespace irt {

/// Violated precondition on a public operation (bad shapes, out-of-range codes).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// User-supplied input that fails validation (CSV contents, config files).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based row/column of the offending cell.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, int row, int column)
      : ValidationError(what + " (row " + std::to_string(row) + ", column " +
                        std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  int row() const { return row_; }
  int column() const { return column_; }

 private:
  int row_;
  int column_;
};

/// Floating-point failure: divergence, non-finite objective, non-convergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-domain argument to an elementary function recorded on a tape.
class DomainError : public NumericalError {
 public:
  DomainError(const std::string& what, std::size_t node)
      : NumericalError(what + " at tape node " + std::to_string(node)), node_(node) {}

  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Item whose discriminations are all zero, so its domain weights are undefined.
class DegenerateItemError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace irt
