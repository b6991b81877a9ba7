#pragma once

#include <stdexcept>
#include <string>

namespace navlab {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: config values, CLI flags, malformed files. Maps to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numeric breakdown during training (non-finite loss, underflowed probability).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace navlab
