#pragma once

#include <stdexcept>
#include <string>

namespace linprobit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched matrix/vector shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A covariance that should be positive definite could not be factored,
/// even after the jitter schedule was exhausted.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double jitter)
      : Error(what + " (last jitter " + std::to_string(jitter) + ")"), jitter_(jitter) {}
  double jitter() const noexcept { return jitter_; }

 private:
  double jitter_;
};

/// Iterative solver or optimizer did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace linprobit
