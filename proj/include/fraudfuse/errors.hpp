#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fraudfuse {

// Base of every error raised by the library. The CLI maps the subclasses to
// exit codes: ConfigError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed input row. `row` is 1-based and counts data rows (the CSV header
// is not a data row); `field` names the offending column.
class ParseError : public DataError {
public:
    ParseError(std::size_t row, std::string field, const std::string& what)
        : DataError("row " + std::to_string(row) + ", field '" + field + "': " + what),
          row_(row),
          field_(std::move(field)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t row_;
    std::string field_;
};

class ShapeError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace fraudfuse
