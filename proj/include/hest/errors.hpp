#pragma once

#include <stdexcept>
#include <string>

namespace hest {

/// Violation of a documented precondition (bad dimension, bad argument).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure: non-finite values, loss of positive definiteness,
/// singular solves. Messages carry the offending block or epoch index.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fewer measurements than unknowns in a snapshot solve.
class UnderdeterminedError : public NumericError {
 public:
  explicit UnderdeterminedError(const std::string& msg) : NumericError(msg) {}
};

/// An iterative solver failed to converge.
class NonConvergenceError : public NumericError {
 public:
  explicit NonConvergenceError(const std::string& msg) : NumericError(msg) {}
};

/// Malformed or inconsistent input files.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hest
