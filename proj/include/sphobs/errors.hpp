#pragma once

#include <stdexcept>
#include <string>

namespace sphobs {

/// Raised when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when inputs violate a documented precondition (sizes, orderings, resolution).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical guard trips (norm drift, step-count overflow, failed solve).
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sphobs
