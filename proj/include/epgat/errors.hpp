// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace epgat {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value, unknown key or unsupported option.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed input data, or too little of it.
class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class BoundsError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint decoding failure. Carries the byte offset where it was detected.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, divergence, or a gradient check that cannot be trusted.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateNeighborhoodError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DeterminismError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace epgat
