#pragma once

#include <stdexcept>
#include <string>

namespace nlsgibbs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMode : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Grid too coarse for exact quadrature of the requested nonlinearity.
class InsufficientResolution : public Error {
 public:
  InsufficientResolution(int have, int need)
      : Error("grid resolution M=" + std::to_string(have) + " too small; need M >= " +
              std::to_string(need)),
        required(need) {}
  int required;
};

/// Importance-sampling estimate is not trustworthy.
class EffectiveSampleSizeTooSmall : public Error {
 public:
  explicit EffectiveSampleSizeTooSmall(double ess)
      : Error("effective sample size " + std::to_string(ess) +
              " < 10; increase beta or the number of samples"),
        ess(ess) {}
  double ess;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace nlsgibbs
