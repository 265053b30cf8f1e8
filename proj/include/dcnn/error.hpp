#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcnn {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid double convolution / layer specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// An operation was requested that does not apply to the given variant.
class VariantError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range hyperparameter or precondition violation.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// NaN / Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Degenerate input such as a zero-norm filter or an empty reference.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File present but its content does not follow the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Architecture notation error. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& reason, std::size_t line, std::size_t column)
      : Error(format(reason, line, column)),
        reason_(reason),
        line_(line),
        column_(column) {}

  const std::string& reason() const noexcept { return reason_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& reason, std::size_t line,
                            std::size_t column) {
    std::string where;
    if (line > 0) where += "line " + std::to_string(line) + ", ";
    where += "column " + std::to_string(column);
    return "parse error at " + where + ": " + reason;
  }

  std::string reason_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace dcnn
