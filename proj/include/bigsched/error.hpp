#pragma once

#include <stdexcept>
#include <string>

namespace bigsched {

/// Base class of every error raised by the library. The kind maps onto the
/// CLI exit codes (usage 1, validation 2, solver 3).
class Error : public std::runtime_error {
 public:
  enum class Kind { Usage = 1, Validation = 2, Solver = 3 };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(Kind::Usage, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Kind::Validation, what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(Kind::Solver, what) {}
};

/// Einsum syntax error; `position` is the 0-based byte offset in the input.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : ValidationError(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace bigsched
