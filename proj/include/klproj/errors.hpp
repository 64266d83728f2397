#pragma once

#include <stdexcept>
#include <string>

namespace klproj {

// Shapes of inputs do not match.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input violates a documented precondition (negative mass, bad grid, ...).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A constraint cannot be met from the current state (zero mass where the
// right-hand side is positive, structurally inconsistent rows, ...).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The reference Newton solver failed to converge; test infrastructure aborts.
class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace klproj
