#pragma once

#include <stdexcept>
#include <string>

namespace tightline {

/// Malformed arguments: empty inputs, a >= b, non-positive lengths, ...
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Interval queries that leave an open window.
class OutOfWindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampler could not produce a configuration (e.g. eigensolver failure).
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the premises needed for a cyclic-phase statement do not hold
/// (unconverged field, vanishing density, alpha = 0 mod e).
class HypothesesNotMet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpecError : public std::runtime_error {
 public:
  SpecError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace tightline
