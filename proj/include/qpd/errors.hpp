#pragma once

#include <stdexcept>
#include <string>

namespace qpd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input or a numerical routine that failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation is violated (bad rate, coarse
/// grid, index out of range, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration input. `field` names the offending JSON location.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qpd
