#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hine {

// Base for all library errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed rows, empty files, unreadable/unwritable paths.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Unknown node, edge type, or name.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf reached a parameter, or a tape was replayed against a newer model.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hine
