#pragma once

#include <stdexcept>
#include <string>

namespace derand {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (p outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Builder or operation parameters violate a documented precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

/// The requested sample size does not satisfy sum_i exp(-D_i m) <= 1.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Interval arithmetic could not certify a choice at the maximum configured precision.
class PrecisionExhausted : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A user-supplied space broke its contract (non-binary indicator, martingale mismatch).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace derand
