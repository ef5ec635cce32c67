#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cofa {

/// Base of every error raised by the library. The CLI maps the three
/// families below onto process exit codes 1, 2 and 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration, bad arguments, or a violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Schema mismatch, or a column used with the wrong kind.
class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Problems with the data itself.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A malformed cell in an input file. Carries its 1-based data row and the
/// column name.
class IngestError : public DataError {
 public:
  IngestError(std::size_t row, std::string column, const std::string& what)
      : DataError("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cofa
