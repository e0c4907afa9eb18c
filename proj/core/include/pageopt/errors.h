#ifndef PAGEOPT_ERRORS_H_
#define PAGEOPT_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pageopt {

// Base of every error raised by the library. Callers that only need to know
// "something failed" catch this; the derived types name the contract that
// was broken.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// trace-model
class UnparseableDocument : public Error {
 public:
  using Error::Error;
};
class UnbalancedEvents : public Error {
 public:
  using Error::Error;
};
class OverlapViolation : public Error {
 public:
  using Error::Error;
};

// ast-engine
class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, std::string expected)
      : Error("syntax error at " + std::to_string(line) + ":" +
              std::to_string(column) + ": expected " + expected),
        line_(line),
        column_(column),
        expected_(std::move(expected)) {}

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& expected() const { return expected_; }

 private:
  int line_;
  int column_;
  std::string expected_;
};
class LocusNotFound : public Error {
 public:
  using Error::Error;
};
class ReparseFailure : public Error {
 public:
  using Error::Error;
};

// operators
class SpanDrift : public Error {
 public:
  using Error::Error;
};

// correctness
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// harness / search
class HarnessUnavailable : public Error {
 public:
  using Error::Error;
};
class OracleNeverLoads : public Error {
 public:
  using Error::Error;
};

// Manifest or on-disk app layout problems.
class InvalidApp : public Error {
 public:
  using Error::Error;
};

}  // namespace pageopt

#endif  // PAGEOPT_ERRORS_H_
