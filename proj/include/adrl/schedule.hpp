#pragma once

#include <cmath>

#include "adrl/errors.hpp"

namespace adrl {

/// M iterations of E episodes each. Iteration i spends M_w episodes on
/// per-view workers and M_c = E - M_w on the global network, where the ratio
/// M_w / M_c moves geometrically from `ratio_first` to `ratio_last`.
struct TrainingSchedule {
  int iterations = 100;
  int episodes_per_iteration = 20;
  double ratio_first = 10.0;
  double ratio_last = 0.1;

  void validate() const {
    if (iterations < 0) throw ConfigError("schedule: iterations must be nonnegative");
    if (episodes_per_iteration < 1) throw ConfigError("schedule: episodes per iteration must be positive");
    if (!(ratio_first > 0.0) || !(ratio_last > 0.0)) throw ConfigError("schedule: ratios must be positive");
  }

  /// rho_i for 1-based iteration i.
  double ratio(int i) const {
    if (i < 1 || i > iterations) throw ConfigError("schedule: iteration out of range");
    if (iterations == 1) return ratio_first;
    const double t = static_cast<double>(i - 1) / static_cast<double>(iterations - 1);
    return ratio_first * std::pow(ratio_last / ratio_first, t);
  }

  /// round(E * rho / (1 + rho)), halves away from zero.
  int worker_episodes(int i) const {
    const double rho = ratio(i);
    return static_cast<int>(std::lround(episodes_per_iteration * rho / (1.0 + rho)));
  }

  int global_episodes(int i) const { return episodes_per_iteration - worker_episodes(i); }

  long total_episodes() const { return static_cast<long>(iterations) * episodes_per_iteration; }
};

}  // namespace adrl
