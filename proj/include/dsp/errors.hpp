#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsp {

/// Base of every error raised by the library. The CLI maps each subclass to
/// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: out-of-range orbital, mismatched dimensions, bad counts.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

  /// Same error with a context prefix on the message; the line number is kept.
  ParseError with_prefix(const std::string& prefix) const { return ParseError(prefix + what(), line_, Raw{}); }

 private:
  struct Raw {};
  ParseError(const std::string& message, std::size_t line, Raw) : Error(message), line_(line) {}
  std::size_t line_;
};

/// Problem size exceeds a configured dense/memory limit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-physical drift, negative radicand, lost normalization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsp
