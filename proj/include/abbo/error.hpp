#pragma once

#include <stdexcept>
#include <string>

namespace abbo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent campaign configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or malformed fixture file, or a fixture that does not
/// cover a requested sequence.
class FixtureError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra or optimizer failure (non-PD covariance, non-finite values).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace abbo
