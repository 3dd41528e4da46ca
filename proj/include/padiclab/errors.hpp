#pragma once

#include <stdexcept>
#include <string>

namespace padiclab {

/// Argument outside the mathematical domain of an operation (zero divisor,
/// point outside Z_p, j_b(0), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A series was asked to converge outside its radius (matrix exp/log).
class ConvergenceError : public std::domain_error {
 public:
  ConvergenceError(const std::string& what, double offending_norm)
      : std::domain_error(what), offending_norm_(offending_norm) {}
  double offending_norm() const noexcept { return offending_norm_; }

 private:
  double offending_norm_;
};

/// A truncated series or quadrature could not reach the requested tolerance.
class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A spec object violates its declared invariants.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Requested finite quotient or lattice does not fit the desk-scale budget.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace padiclab
