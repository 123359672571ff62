#pragma once

#include <stdexcept>
#include <string>

namespace adrl {

/// Tensor or container dimensions do not line up.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf showed up in an intermediate value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sampling more transitions than a replay buffer holds.
struct UnderfullError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation not allowed in the current state (e.g. stepping a finished episode).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace adrl
