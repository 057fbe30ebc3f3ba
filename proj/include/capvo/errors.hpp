#pragma once

#include <stdexcept>
#include <string>

namespace capvo {

// Error categories thrown by the library. Everything derives from Error so
// callers can catch one type at the CLI boundary.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/parameter shapes do not line up.
struct DimensionError : Error {
  using Error::Error;
};

// A configuration value is unusable (non-integral conv output size,
// missing loss weight, infeasible trajectory spec, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Called out of order (e.g. backward without a forward cache).
struct StateError : Error {
  using Error::Error;
};

// Input data violates a documented precondition.
struct ValidationError : Error {
  using Error::Error;
};

// Camera outside or intersecting the scene surface.
struct GeometryError : Error {
  using Error::Error;
};

// Filesystem failures, always carrying the offending path.
struct IoError : Error {
  using Error::Error;
};

}  // namespace capvo
