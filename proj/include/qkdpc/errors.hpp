#pragma once

#include <stdexcept>
#include <string>

namespace qkdpc {

// Base of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct StructureError : Error {
  using Error::Error;
};
struct NegativityError : Error {
  using Error::Error;
};
struct InfiniteDivergence : Error {
  using Error::Error;
};
struct NotPsdError : Error {
  using Error::Error;
};
struct InvalidIsometry : Error {
  using Error::Error;
};
struct InvalidStatistics : Error {
  using Error::Error;
};
struct DegenerateStatistics : Error {
  using Error::Error;
};
struct PreconditionViolation : Error {
  using Error::Error;
};
struct RankInconsistency : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace qkdpc
