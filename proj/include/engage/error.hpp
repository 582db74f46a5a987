#pragma once

#include <stdexcept>
#include <string>

namespace engage {

/// Malformed or out-of-contract input data (bad files, invariant violations,
/// signals that cannot yield features). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometric configuration that admits no unique pose.
class DegenerateError : public DataError {
 public:
  using DataError::DataError;
};

/// Iterative solver ran out of iterations; carries the final residual.
class ConvergenceError : public DataError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : DataError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace engage
