#pragma once

#include <stdexcept>
#include <string>

namespace cvb {

// Parameter outside the mathematical domain of an operation (a < 1, x0 <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Shape or index mismatch: wrong matrix dimension, bad mode index, odd run count.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input that carries no information, e.g. a distribution with zero total mass.
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Quadrature or root finding did not reach the requested accuracy.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simulator guard: a subsystem was transferred or measured by a non-owner,
// or measured twice.
class OwnershipViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cvb
