#pragma once

#include <stdexcept>
#include <string>

namespace rdist {

/// Non-finite input or a parameter outside its mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver ran out of iterations.
class IterationError : public std::runtime_error {
 public:
  IterationError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Distortion coefficients whose radial map is not strictly increasing on the
/// radius range of interest (the image would fold onto itself).
class FoldError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Missing files, unreadable or unwritable paths.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values produced by a computation (e.g. a diverging loss).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A feature the caller expected to find in an image is missing.
class DetectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor / batch dimensions that do not match a network configuration.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace rdist
