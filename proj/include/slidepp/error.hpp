#pragma once

#include <stdexcept>
#include <string>

namespace slidepp {

// Base for all library failures. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters, unknown names, malformed config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (grids, point files).
class DataError : public Error {
 public:
  using Error::Error;
};

// Solver failures, overflow guards, unstable bootstrap.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace slidepp
