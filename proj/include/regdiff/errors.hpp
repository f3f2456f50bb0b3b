#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace regdiff {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// An argument violated a documented precondition (bad index, shape mismatch, ...).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// A depth value was nonpositive or nonfinite where a positive depth is required.
class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

/// Too few samples for the requested estimation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// The input configuration is rank deficient; carries the singular values that exposed it.
class DegenerateConfigurationError : public Error {
 public:
  DegenerateConfigurationError(const std::string& what, std::vector<double> singular_values)
      : Error(what), singular_values_(std::move(singular_values)) {}

  const std::vector<double>& singular_values() const { return singular_values_; }

 private:
  std::vector<double> singular_values_;
};

/// Homogeneous point mapped to (near-)zero last coordinate.
class PointAtInfinityError : public Error {
 public:
  using Error::Error;
};

/// Registration could not produce a usable warp (RANSAC consensus failure, ...).
class RegistrationFailureError : public Error {
 public:
  using Error::Error;
};

/// The synthetic generator could not satisfy its constraints for this seed.
class GenerationFailureError : public Error {
 public:
  using Error::Error;
};

/// File could not be read/parsed or has an unexpected layout.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace regdiff
