#pragma once

#include <stdexcept>
#include <string>

namespace errcalc {

// Common base so callers can catch anything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An expression was evaluated outside its domain (log of a negative
// number, division by zero, non-integer power, ...).
struct DomainError : Error {
  using Error::Error;
};

// Coordinate index out of range for the ambient dimension.
struct ArityError : Error {
  using Error::Error;
};

// A Monte Carlo loop produced a NaN or infinite sample.
struct NonFiniteError : Error {
  using Error::Error;
};

// Orthonormality (Gram) check of a basis failed.
struct BasisError : Error {
  using Error::Error;
};

// Monte Carlo quadrature exceeded its standard-error budget.
struct QuadratureError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

// A matrix required to be positive semidefinite was not.
struct PositivityError : Error {
  using Error::Error;
};

// Matrix square-root factorization failed.
struct FactorizationError : Error {
  using Error::Error;
};

// Conditional-expectation estimator hit an empty bin or neighborhood.
struct EstimatorError : Error {
  using Error::Error;
};

// A basis or enumeration exceeded its configured cap.
struct SizeError : Error {
  using Error::Error;
};

// Truncation defect exceeded the configured budget.
struct TruncationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& msg, int line, int column)
      : Error(msg + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line(line),
        column(column) {}
  int line;
  int column;
};

struct ValidationError : Error {
  using Error::Error;
};

}  // namespace errcalc
