#pragma once

#include <stdexcept>
#include <string>

namespace credo {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A vector or matrix argument had the wrong size.
class DimensionError : public Error {
 public:
  DimensionError(std::string what_arg, long expected, long actual)
      : Error(what_arg + ": expected dimension " + std::to_string(expected) +
              ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  long expected() const { return expected_; }
  long actual() const { return actual_; }

 private:
  long expected_;
  long actual_;
};

// An argument is outside the domain of the operation (non-finite input,
// class index out of range, invalid configuration value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a file failed, or its contents do not follow the schema.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace credo
