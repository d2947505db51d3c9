#pragma once

#include <stdexcept>

namespace lsvi {

// Feature vector lies outside the unit ball beyond tolerance.
struct InvalidFeatureError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Instance generator exhausted its resampling budget without producing a
// valid model.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// SPD factorization failed even after a jitter retry; numerical state cannot
// be trusted past this point.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A documented precondition that is checked numerically does not hold for
// the supplied arguments.
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace lsvi
