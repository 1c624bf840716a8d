#pragma once

#include <stdexcept>
#include <string>

namespace eegtl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value or configuration outside its documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or inconsistent on-disk artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace eegtl
