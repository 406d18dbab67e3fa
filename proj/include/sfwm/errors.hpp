#pragma once

#include <stdexcept>
#include <string>

namespace sfwm {

// Base for every error raised by the toolkit. The CLI maps UsageError to
// exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, malformed input files, unknown config keys.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite or out-of-domain numerical input.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A spectrum without a usable peak.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Spectral or delay grids that cannot represent the requested quantity.
class GridError : public Error {
 public:
  using Error::Error;
};

// Data that carries no information (all zeros, zero predictions, ...).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// Measured value outside the range a model can reproduce.
class InversionError : public Error {
 public:
  using Error::Error;
};

// Detector model produced an invalid mean.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Nonlinear fit that did not converge. Carries the best iterate so callers
// can still inspect it.
template <typename Result>
class FitError : public Error {
 public:
  FitError(const std::string& what, Result best)
      : Error(what), best_(std::move(best)) {}
  const Result& best_iterate() const noexcept { return best_; }

 private:
  Result best_;
};

}  // namespace sfwm
