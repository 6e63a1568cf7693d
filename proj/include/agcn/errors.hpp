#pragma once

#include <stdexcept>
#include <string>

namespace agcn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain an operation accepts (e.g. probability > 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or infeasible configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace agcn
