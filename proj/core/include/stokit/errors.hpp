#pragma once

#include <stdexcept>
#include <string>

namespace stokit {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values: non-positive steps, inverted bounds, dimension
// mismatches, too few samples.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Times outside a path window or not on its grid.
class RangeError : public Error {
 public:
  using Error::Error;
};

// The model lacks something the operation needs (Jacobians, a closed form,
// commutative noise).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Sampled data contained non-finite values.
class DataError : public Error {
 public:
  using Error::Error;
};

// Unknown catalog entry.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A linear solve failed or the assembled operator is singular.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Too many Monte Carlo samples hit the time cap before the event of
// interest, so the requested statistic is undefined.
class CensoringError : public Error {
 public:
  using Error::Error;
};

// A simulated state became non-finite or exceeded the blow-up threshold.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace stokit
