#pragma once

#include <stdexcept>
#include <string>

namespace evalign {

// Error taxonomy shared across the library. The CLI maps these onto process
// exit codes: IoError -> 1, ValidationError (and subclasses) -> 2,
// NumericError -> 3.

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed content in an input file (carries line/offset in the message).
struct ParseError : IoError {
  using IoError::IoError;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : ValidationError {
  using ValidationError::ValidationError;
};

struct OutOfBounds : ValidationError {
  using ValidationError::ValidationError;
};

struct InvalidSpec : ValidationError {
  using ValidationError::ValidationError;
};

struct EmptyStream : ValidationError {
  using ValidationError::ValidationError;
};

struct NonPositiveDelta : ValidationError {
  using ValidationError::ValidationError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : NumericError {
  using NumericError::NumericError;
};

}  // namespace evalign
