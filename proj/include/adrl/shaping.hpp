#pragma once

// Deviation-penalty reward shaping and deviation-driven exploration.

#include <algorithm>
#include <cmath>
#include <vector>

#include "adrl/errors.hpp"
#include "adrl/linalg.hpp"

namespace adrl {

/// Columns are the workers' actions a^(w).
using ActionMatrix = Matrix;

struct Deviation {
  Vector per_worker;  // delta^(w)
  double mean = 0.0;  // delta
};

/// delta^(w) = || a^(w) - mean_{v != w} a^(v) ||^2, delta = mean_w delta^(w).
/// A single worker has no peers; its deviation is defined as zero.
inline Deviation deviation(const ActionMatrix& a) {
  const auto n = a.cols();
  if (n == 0) throw ShapeError("deviation: action matrix has no workers");
  Deviation d;
  d.per_worker = Vector::Zero(n);
  if (n == 1) return d;
  const double inv = 1.0 / static_cast<double>(n - 1);
  // summing differences keeps identical actions at exactly zero
  for (Eigen::Index w = 0; w < n; ++w) {
    Vector gap = Vector::Zero(a.rows());
    for (Eigen::Index v = 0; v < n; ++v)
      if (v != w) gap += a.col(w) - a.col(v);
    d.per_worker[w] = (gap * inv).squaredNorm();
  }
  d.mean = d.per_worker.mean();
  return d;
}

struct ShapedReward {
  double raw = 0.0;
  Vector deviations;
  double mean_deviation = 0.0;
  double gamma_r = 0.1;
  double shaped = 0.0;
};

/// r^c = r - gamma_r * delta(A).
inline ShapedReward shape_reward(double r, const ActionMatrix& a, double gamma_r) {
  if (gamma_r < 0.0) throw ConfigError("shape_reward: gamma_r must be nonnegative");
  const Deviation d = deviation(a);
  return {r, d.per_worker, d.mean, gamma_r, r - gamma_r * d.mean};
}

struct ExplorationParams {
  std::size_t window = 1000;  // T_w
  double kappa = 1.0;
  double eps_min = 0.05;
  double eps_max = 0.5;

  void validate() const {
    if (window == 0) throw ConfigError("exploration window must be positive");
    if (kappa < 0.0) throw ConfigError("kappa must be nonnegative");
    if (!(eps_min >= 0.0 && eps_min <= eps_max)) throw ConfigError("need 0 <= eps_min <= eps_max");
  }
};

/// eps^(w) = clamp(kappa * mean of the last <= T_w deviations of worker w, eps_min, eps_max);
/// eps^c is the mean of the eps^(w).
class ExplorationSchedule {
 public:
  ExplorationSchedule(int workers, ExplorationParams params) : params_(params), rings_(workers) {
    params_.validate();
    if (workers < 1) throw ConfigError("exploration schedule needs at least one worker");
    for (auto& r : rings_) r.reserve(params_.window);
    next_.assign(rings_.size(), 0);
    eps_ = Vector::Constant(workers, clamp_eps(0.0));
  }

  int workers() const { return static_cast<int>(rings_.size()); }
  const ExplorationParams& params() const { return params_; }

  void update(const Vector& deviations) {
    require_shape(deviations.size() == workers(), "update_exploration: one deviation per worker");
    for (int w = 0; w < workers(); ++w) {
      auto& ring = rings_[static_cast<std::size_t>(w)];
      if (ring.size() < params_.window) {
        ring.push_back(deviations[w]);
      } else {
        auto& slot = next_[static_cast<std::size_t>(w)];
        ring[slot] = deviations[w];  // oldest entry
        slot = (slot + 1) % params_.window;
      }
      eps_[w] = clamp_eps(params_.kappa * window_mean(w));
    }
  }

  double window_mean(int w) const {
    const auto& ring = rings_.at(static_cast<std::size_t>(w));
    if (ring.empty()) return 0.0;
    double s = 0.0;
    for (double d : ring) s += d;
    return s / static_cast<double>(ring.size());
  }

  double epsilon(int w) const { return eps_[w]; }
  const Vector& epsilons() const { return eps_; }
  double global_epsilon() const { return eps_.mean(); }

 private:
  double clamp_eps(double e) const { return std::clamp(e, params_.eps_min, params_.eps_max); }

  ExplorationParams params_;
  std::vector<std::vector<double>> rings_;
  std::vector<std::size_t> next_;
  Vector eps_;
};

inline void update_exploration(ExplorationSchedule& sched, const Vector& deviations) { sched.update(deviations); }

}  // namespace adrl
