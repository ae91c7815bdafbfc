#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace feaspath {

/// Raised for malformed case or document text. Carries the 1-based line
/// number when known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised when a syntactically valid case violates a model invariant.
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for cost models other than polynomials of degree <= 2 with
/// nonnegative linear and quadratic coefficients.
class UnsupportedCostError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Newton-Raphson did not reach the mismatch tolerance.
class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The power-flow Jacobian could not be factorized.
class SingularJacobianError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The starting control does not give a feasible operating point.
class InfeasibleStartError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent run settings or dimensions.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace feaspath
