#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace feedforge {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent user configuration (unknown class, forbidden weights, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be turned into a usable graph or network.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Syntax error in an input document, with 1-based position when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : DataError(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    return what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

class EmptyGraphError : public DataError {
 public:
  using DataError::DataError;
};

/// Raised when a structure fails its invariants; carries one message per offender.
class ValidationError : public DataError {
 public:
  explicit ValidationError(std::vector<std::string> offenders)
      : DataError(join(offenders)), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "validation failed";
    for (const auto& s : items) out += "\n  - " + s;
    return out;
  }

  std::vector<std::string> offenders_;
};

}  // namespace feedforge
