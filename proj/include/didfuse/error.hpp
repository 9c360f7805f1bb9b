#pragma once

#include <stdexcept>
#include <string>

namespace didfuse {

// Root of every exception thrown by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or image shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, solver did not converge, training diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Unreadable, truncated or malformed input files; corrupt checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace didfuse
