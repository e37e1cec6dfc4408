#pragma once

#include <stdexcept>
#include <string>

namespace otspec {

// Argument outside the mathematical domain of an operation (non-finite
// matrix function value, non-SPD input, p outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(const std::string& what, long expected, long actual)
      : std::invalid_argument(what + ": expected dimension " + std::to_string(expected) +
                              ", got " + std::to_string(actual)) {}
};

// A numerical procedure (root finding, quadrature, Sinkhorn) did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two algebraically equal routes disagree beyond tolerance.
class IdentityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_same_dim(const char* what, long expected, long actual) {
  if (expected != actual) throw DimensionMismatch(what, expected, actual);
}

}  // namespace otspec
