#pragma once

#include <stdexcept>
#include <string>

namespace sbfnn {

/// Violated precondition on a call (bad length, bad count, unknown kind).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand shapes that cannot be combined.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Argument outside the mathematical domain of a function (log of a negative, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite values appeared during integration or training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double at) : std::runtime_error(what), at_(at) {}
  /// Time (integration) or epoch (training) where the failure was detected.
  double at() const noexcept { return at_; }

 private:
  double at_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sbfnn
