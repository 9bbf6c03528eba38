#pragma once

#include <stdexcept>
#include <string>

namespace lspc {

/// Base class for every error raised by the library. `exit_code()` is the
/// process status the command-line tool reports for it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Bad arguments, wrong dimensions, API misuse.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

/// File system failures and malformed files.
class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ParseError : public IoError {
 public:
  using IoError::IoError;
};

/// Non-finite losses, gradients or parameters.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// The constrained problem has no feasible policy.
class InfeasibleError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// A checked inequality or acceptance threshold did not hold.
class AcceptanceFailure : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace lspc
