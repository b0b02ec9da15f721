#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fors {

/// Bad argument supplied by the caller (negative rate, r outside [0,1], ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An estimator family returned a value outside its declared clip range.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Gradient/score oracle returned NaN or inf.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generic "this input cannot be handled" error with a specific message.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection loop hit max_outer_iters. Carries the statistics accumulated so
/// far; hitting this usually means B or the step size is badly tuned.
class IterationBudgetExceeded : public std::runtime_error {
 public:
  IterationBudgetExceeded(std::uint64_t outer, std::uint64_t draws, std::uint64_t proposals)
      : std::runtime_error("FORS exceeded its outer-iteration budget after " +
                           std::to_string(outer) + " proposals (" + std::to_string(draws) +
                           " estimator draws)"),
        outer_iterations(outer),
        estimator_draws(draws),
        proposal_draws(proposals) {}

  std::uint64_t outer_iterations;
  std::uint64_t estimator_draws;
  std::uint64_t proposal_draws;
};

/// A backward diffusion step failed; `step` is the 1-based index t.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(std::size_t t, const std::string& what)
      : std::runtime_error("backward step t=" + std::to_string(t) + ": " + what), step(t) {}
  std::size_t step;
};

/// Fixed-point prox iteration diverged.
class OptimizationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fors
