#pragma once

#include <stdexcept>
#include <string>

namespace rdh {

/// Invalid parameters or violated preconditions (bad law, non-coercive field,
/// malformed configuration).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that should have succeeded did not (solver stagnation,
/// broken bracketing).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rdh
