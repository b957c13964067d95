#pragma once

#include <stdexcept>
#include <string>

namespace inkgan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or channel counts that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Mathematically invalid input (log of a non-positive value, empty reduction).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. calling backward on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad PNG, checkpoint, manifest, CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace inkgan
