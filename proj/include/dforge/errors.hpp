#pragma once

#include <stdexcept>
#include <string>

namespace dforge {

// Base of every error thrown by the library. The CLI maps subclasses to
// exit codes (see tools/detector_forge.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A parameter handed to a Phi oracle (or found in a parameter set) is outside
// the family's admissible range, e.g. a negative Poisson intensity.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// A requested oracle is not available (e.g. support function of a set that
// only knows how to project).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

}  // namespace dforge
