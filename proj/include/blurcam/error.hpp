#pragma once

#include <stdexcept>
#include <string>

namespace blurcam {

// Base for every error raised by the library. The CLI maps each kind to an
// exit code (argument 2, data/format 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ArgumentError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "argument"; }
};

// Time or coordinate outside the covered interval.
class RangeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
  const char* kind() const noexcept override { return "range"; }
};

class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data"; }
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "format"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "singularity"; }
};

class InsufficientDataError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "insufficient_data"; }
};

}  // namespace blurcam
