#pragma once

#include <stdexcept>
#include <string>

namespace ginit {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// manifold
class NotSkewSymmetric : public Error {
 public:
  using Error::Error;
};
class AntipodalPoints : public Error {
 public:
  using Error::Error;
};

// preintegration / streams
class EmptyStream : public Error {
 public:
  using Error::Error;
};
class NonMonotonicTimestamps : public Error {
 public:
  using Error::Error;
};

// residual assembly
class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// solver
class SingularNormalEquations : public Error {
 public:
  using Error::Error;
};
class NonFiniteCost : public Error {
 public:
  using Error::Error;
};

// observability
class UnsupportedOrder : public Error {
 public:
  using Error::Error;
};

// trigger
class InsufficientMeasurements : public Error {
 public:
  using Error::Error;
};

// simulation / evaluation
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

// dataset io
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("parse error at line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ginit
