#pragma once

#include <stdexcept>
#include <string>

namespace wasncal {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (bad shape, position outside room, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape incompatible with a layer or network; the message names the layer.
class ShapeError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Rejection sampling exhausted its retry budget.
class SamplingFailure : public Error {
 public:
  using Error::Error;
};

/// A measurement (e.g. reverberation time) could not be taken from the data.
class MeasurementUnavailable : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// No usable distance estimate to fix the geometry scale.
class ScaleUnavailable : public Error {
 public:
  using Error::Error;
};

/// Geometry solver or RANSAC did not produce an acceptable model.
class CalibrationFailure : public Error {
 public:
  CalibrationFailure(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace wasncal
