#pragma once

#include <stdexcept>
#include <string>

namespace cxr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or parameter shapes do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, malformed or inconsistent input data (CSV, images, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file does not follow the expected binary layout.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// NaN/Inf produced during computation, or a degenerate numeric input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cxr
