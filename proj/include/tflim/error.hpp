#pragma once

#include <stdexcept>
#include <string>

namespace tflim {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on user-supplied parameters was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A discretization would exceed the configured size cap.
class SizeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An iterative or adaptive numerical procedure failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace tflim
