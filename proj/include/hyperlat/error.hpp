#pragma once

#include <stdexcept>
#include <string>

namespace hyperlat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact integer arithmetic left the 128-bit range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature hit its evaluation cap before reaching tolerance.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// An enumeration does not reach far enough to answer the question asked.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Enumeration node budget exhausted. `partial()` reports that any results
/// handed back alongside the error are incomplete.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, bool partial)
      : Error(what), partial_(partial) {}
  bool partial() const noexcept { return partial_; }

 private:
  bool partial_;
};

}  // namespace hyperlat
