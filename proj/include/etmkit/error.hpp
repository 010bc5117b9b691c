#pragma once

#include <stdexcept>
#include <string>

namespace etm {

// Values double as process exit codes for the command-line tool.
enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

// Throws the subclass that matches kind.
[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::Usage: throw UsageError(what);
    case ErrorKind::Data: throw DataError(what);
    case ErrorKind::Numerical: throw NumericalError(what);
  }
  throw Error(kind, what);
}

}  // namespace etm
