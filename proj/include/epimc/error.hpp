#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epimc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed formula, program, candidate or graph text. Positions are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A formula or relation mentions a variable or agent the structure lacks.
class FitnessError : public Error {
 public:
  using Error::Error;
};

/// A joint action or program is not enabled where it is applied.
class EnablednessError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition (index range, malformed input).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// World cap or wall-clock budget exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace epimc
