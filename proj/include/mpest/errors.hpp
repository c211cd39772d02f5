#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mpest {

// Precondition violations on inputs (bad index, mismatched sizes, invalid spec).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failures of the estimation pipeline proper: empty support, GA failure, etc.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConditioningError : public EstimationError {
 public:
  ConditioningError(const std::string& what, double condition)
      : EstimationError(what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// Raised by the GA when the objective returns a non-finite value.
class GaRunError : public EstimationError {
 public:
  GaRunError(const std::string& what, std::vector<double> params)
      : EstimationError(what), params_(std::move(params)) {}

  const std::vector<double>& params() const noexcept { return params_; }

 private:
  std::vector<double> params_;
};

}  // namespace mpest
