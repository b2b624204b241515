#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pairflow {

// Base of every error thrown by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data failed validation (bad values, inconsistent mask, wrong shape).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// The problem is structurally unusable, e.g. fewer than two assets.
class InvalidProblem : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Observed volumes are nonzero outside the supplied mask.
class InconsistentInput : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyWindow : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientData : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UndefinedShare : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Configuration cannot be satisfied (edge budget below a spanning tree,
// density too low for a connected mask, ...).
class InfeasibleConfig : public Error {
 public:
  using Error::Error;
};

class InfeasibleBudget : public InfeasibleConfig {
 public:
  using InfeasibleConfig::InfeasibleConfig;
};

// The KKT matrix could not be factorized even after the Hessian shift was
// escalated to its cap.
class DegenerateSystem : public Error {
 public:
  DegenerateSystem(const std::string& what, double shift) : Error(what), shift_(shift) {}

  double shift() const noexcept { return shift_; }

 private:
  double shift_;
};

// Broken internal invariant; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pairflow
