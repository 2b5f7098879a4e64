#pragma once

#include <stdexcept>
#include <string>

namespace midsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation not available for this kind of input (e.g. eta of an
/// undeclared custom rate).
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// Too few entries in a moment vector.
class ArityError : public Error {
 public:
  using Error::Error;
};

/// Invalid solver or scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Zero or negative mass where a probability normalisation is required.
class DegenerateState : public Error {
 public:
  using Error::Error;
};

/// Variance is zero: the profile is a Dirac mass and cannot be rescaled.
class ConcentrationError : public Error {
 public:
  using Error::Error;
};

/// Two characteristic functions do not share moments up to the order the
/// Fourier distance needs.
class MomentMismatch : public Error {
 public:
  MomentMismatch(int order, const std::string& what)
      : Error(what), order_(order) {}
  int order() const noexcept { return order_; }

 private:
  int order_;
};

/// A theorem hypothesis (e.g. 0 < delta < eta(xbar0)) is violated.
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

/// A solver stopped (NaN, overflow, extinction, closure breakdown).
class SolverAbort : public Error {
 public:
  SolverAbort(double t, const std::string& what)
      : Error(what + " (t=" + std::to_string(t) + ")"), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace midsel
