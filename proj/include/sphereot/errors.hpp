#pragma once

#include <stdexcept>
#include <string>

namespace sphereot {

/// Base of every error thrown by the library. Each subclass maps to one
/// failure class of the command-line pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain where an operation is defined (e.g. a point
/// off the open hemisphere of a chart).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Infeasible or malformed transport problem.
class SolverError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Coupling support that cannot be read as at most two images per atom.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class NullityError : public Error {
 public:
  using Error::Error;
};

class IOError : public Error {
 public:
  using Error::Error;
};

}  // namespace sphereot
