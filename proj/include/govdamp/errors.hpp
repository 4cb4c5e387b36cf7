#pragma once

#include <stdexcept>
#include <string>

namespace govdamp {

// Bad input: malformed files, dangling references, invalid options. CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergent power flow, singular reduction, failed SDP. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PowerFlowDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Network split into more than one island (after a trip, or as given).
class IslandedNetwork : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Equilibrium needs a state outside its physical limits (e.g. valve opening > 1).
class LimitViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace govdamp
