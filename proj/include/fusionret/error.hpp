#pragma once

#include <stdexcept>
#include <string>

namespace fusionret {

/// Base for every error the library raises. The CLI maps all of these to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its allowed range (tau <= 0, k too large, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but mathematically unusable, e.g. a zero-norm row.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Content violates a documented invariant (NaN entries, out-of-range index).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed. Messages carry the byte offset or line number.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fusionret
