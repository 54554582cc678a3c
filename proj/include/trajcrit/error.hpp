#pragma once

#include <stdexcept>
#include <string>

namespace trajcrit {

// Base for every error raised by the library. The CLI maps DataError-derived
// failures to exit code 1 and ConfigError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Missing column, malformed cell, duplicate id.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Lane id not present in the layout, unknown location.
class LayoutError : public DataError {
 public:
  using DataError::DataError;
};

// Frames of two vehicles that were expected to share a time step do not.
class SyncError : public DataError {
 public:
  using DataError::DataError;
};

class EmptySliceError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid argument to a numerical routine (histogram spec, smoothing window,
// degenerate sample).
class SpecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace trajcrit
