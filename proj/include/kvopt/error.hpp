#pragma once

#include <stdexcept>
#include <string>

namespace kvopt {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Raised when a nonlinearity is evaluated at a non-finite point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class CompileError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// The incremental solver's d = G c + f invariant no longer holds.
class StateDriftError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class ServiceError : public Error {
 public:
  using Error::Error;
};

}  // namespace kvopt
