#pragma once

#include <stdexcept>
#include <string>

namespace driftbayes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed specs, configs, CSV files, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A drift or density evaluated to a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Quadrature failed to reach the requested relative tolerance.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

/// Normalizing constant or integral is not finite (tail assumptions violated).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Result overflowed even after moving to the log domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Euler trajectory left the guard hypercube.
class ExplosionError : public Error {
 public:
  using Error::Error;
};

/// Net construction exceeded its atom cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace driftbayes
