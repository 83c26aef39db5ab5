#pragma once

#include <stdexcept>
#include <string>

namespace cvkf {

// Controls for the damped-substitution solves behind every implicit step.
// damping = 1 is plain substitution; smaller values relax the move toward
// each new candidate.
struct FixedPointConfig {
  int max_iter = 50;
  double tol = 1e-10;
  double damping = 1.0;
};

// Per-step diagnostics. floored reports that a covariance produced during
// the step had to be lifted back to positive semidefinite.
struct StepInfo {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
  bool floored = false;
};

class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what + " (" + std::to_string(iterations) +
                           " iterations, residual " +
                           std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

inline void validate(const FixedPointConfig& fp) {
  if (fp.max_iter < 1) {
    throw std::invalid_argument("FixedPointConfig: max_iter must be >= 1");
  }
  if (!(fp.tol > 0.0)) {
    throw std::invalid_argument("FixedPointConfig: tol must be positive");
  }
  if (!(fp.damping > 0.0) || fp.damping > 1.0) {
    throw std::invalid_argument("FixedPointConfig: damping must be in (0, 1]");
  }
}

}  // namespace cvkf
