#pragma once

#include <stdexcept>
#include <string>

namespace tlp {

// Error taxonomy shared across the library. CLI exit codes are derived from
// these: config/argument problems -> 2, numeric failures -> 3, bad data -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor rank/dimension mismatches.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid argument values (bad permutation, fraction outside [0,1], ...).
struct ArgumentError : Error {
  using Error::Error;
};

// Non-finite values produced by a numerical operation; carries the op name.
struct NumericError : Error {
  using Error::Error;
};

// Structural violations (not a tree, non-one-hot row, ...).
struct ValidityError : Error {
  using Error::Error;
};

// Bad file contents located by file/line or record id.
struct DataError : Error {
  using Error::Error;
};

// Malformed input while reading, located by line number.
struct ParseError : Error {
  using Error::Error;
};

// Inconsistent run configuration (e.g. early stopping without a dev set).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace tlp
