#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace factorcop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data problems: missing columns, unparsable cells, out-of-range codes.
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& column)
      : DataError("schema error: missing column '" + column + "'"), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t row, const std::string& what)
      : DataError("parse error at row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Optimizer failed; carries the best iterate seen so callers can inspect it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best = {})
      : Error(what), best_(std::move(best)) {}
  const std::vector<double>& best_iterate() const noexcept { return best_; }

 private:
  std::vector<double> best_;
};

/// A Godambe (or other) information matrix could not be inverted.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

}  // namespace factorcop
