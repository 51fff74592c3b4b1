#pragma once

#include <stdexcept>
#include <string>

namespace csvgd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments disagree in shape or count.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input is too small or too degenerate to compute the requested quantity.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// The iteration reached a state it cannot continue from (e.g. NaN objective).
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Invalid rigid transform, or a log map evaluated outside its principal branch.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Barrier gradient requested at a point outside the barrier's domain.
class BarrierDomainError : public Error {
 public:
  using Error::Error;
};

/// Formulation/constraint combination the formulation cannot express.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampler could not find enough mass in the feasible region.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

}  // namespace csvgd
