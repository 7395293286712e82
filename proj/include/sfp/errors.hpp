#pragma once

#include <stdexcept>
#include <string>

namespace sfp {

// Root of every error the library raises. The CLI maps DataError to exit
// code 2 and NumericalError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Misuse of a stateful object (stepping a finished episode, backward without
// a recorded forward pass).
class StateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, int line, const std::string& field,
             const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": field '" + field +
                  "': " + what),
        line_(line),
        field_(field) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class VersionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatch : public DataError {
 public:
  using DataError::DataError;
};

class RejectionLimitExceeded : public DataError {
 public:
  using DataError::DataError;
};

class MaxPivotsExceeded : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonFiniteValue : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace sfp
