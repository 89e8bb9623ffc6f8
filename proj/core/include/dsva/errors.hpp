#pragma once

#include <stdexcept>
#include <string>

namespace dsva {

// Invalid user input: broken invariants, malformed files, unknown names.
// The CLI maps this family to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config file problems; message names the offending key.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Tensor dimension mismatch between operands.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Bad argument to an operation (empty probe set, unknown class, ...).
class InputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Argument outside the mathematical domain (e.g. temperature <= 0).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Filesystem / decode failures. The CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dsva
