#pragma once

#include <stdexcept>
#include <string>

namespace lsedit {

// Base of every error raised by the toolkit. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line or configuration key.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input data violates a declared invariant (malformed file, range error, unknown name...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, exhausted sampling budgets, failed convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsedit
