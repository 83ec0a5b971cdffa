#pragma once

#include <stdexcept>
#include <string>

namespace bmamba {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape, width, key or option mismatch. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter outside its admissible domain (e.g. lambda <= 0).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Zero-order hold needs A != 0; the Taylor rule has no such restriction.
class DegenerateRateError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Malformed or corrupted file (bad magic, truncated payload, CRC mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training. Maps to CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace bmamba
