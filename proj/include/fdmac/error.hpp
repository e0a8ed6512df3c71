#pragma once

#include <stdexcept>
#include <string>

namespace fdmac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The analytical model reached a point where a probability or a
/// denominator left its admissible range.
class InfeasibleModel : public Error {
 public:
  InfeasibleModel(std::string quantity, double value)
      : Error("model infeasible: " + quantity + " = " + std::to_string(value)),
        quantity_(std::move(quantity)),
        value_(value) {}

  const std::string& quantity() const noexcept { return quantity_; }
  double value() const noexcept { return value_; }

 private:
  std::string quantity_;
  double value_;
};

/// Fixed-point iteration ran out of iterations. Carries the last iterate.
class NonConvergence : public Error {
 public:
  NonConvergence(double omega, double omega_ap, double nu, double residual, int iterations)
      : Error("fixed point did not converge after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        omega(omega),
        omega_ap(omega_ap),
        nu(nu),
        residual(residual),
        iterations(iterations) {}

  double omega;
  double omega_ap;
  double nu;
  double residual;
  int iterations;
};

}  // namespace fdmac
