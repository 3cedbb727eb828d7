#pragma once

#include <stdexcept>
#include <string>

namespace immf {

/// Bad input that the caller could have avoided: wrong shapes, unknown names,
/// out-of-range settings. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A value became NaN or Inf. Carries the name of the op that produced it.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& op, const std::string& detail)
      : std::runtime_error("non-finite value produced by '" + op + "': " + detail), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// Filesystem failures and malformed files. The CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace immf
