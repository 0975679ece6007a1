#pragma once

#include <stdexcept>
#include <string>

namespace tdr {

/// Malformed or out-of-range input: bad state ids, corrupt files, bad parameters.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration file or CLI parameter problem.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A ratio pi_e/pi_b or p_e/p_b whose denominator vanishes where the numerator does not.
class OverlapViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-convergence, degenerate weights and similar numerical failures.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace tdr
