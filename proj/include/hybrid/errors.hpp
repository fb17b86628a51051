#pragma once

#include <stdexcept>
#include <string>

namespace hybrid {

// Root of every error thrown by the library. Each subclass maps onto one
// failure category the CLI translates into an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values, including malformed sampling intervals.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or training divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Corrupt or truncated files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybrid
