#ifndef DIRSEL_ERRORS_HPP
#define DIRSEL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dirsel {

// Base class for every failure this library raises on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dimension mismatches and malformed shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numeric breakdowns: non-finite values, singular or indefinite matrices,
// overflowing scalings. Messages name the offending index where known.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Elementwise domain violations (log of a non-positive value, divide by zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A distance row without usable spread (all real entries equal).
class DegenerateRowError : public Error {
 public:
  explicit DegenerateRowError(std::size_t row, const std::string& detail)
      : Error("degenerate distance row " + std::to_string(row) + ": " + detail),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// A dataset with nothing usable left (for example all features constant).
class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration; message names the field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input files; message carries row/column context.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dirsel

#endif  // DIRSEL_ERRORS_HPP
