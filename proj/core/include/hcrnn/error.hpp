#pragma once

#include <stdexcept>
#include <string>

namespace hcrnn {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// API misuse (detached backward seed, empty sequence, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A forward op produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed checkpoint or depth file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Malformed manifest record; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Data that parses but violates a domain constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The crop cube does not project onto the image.
class CropError : public Error {
 public:
  using Error::Error;
};

}  // namespace hcrnn
