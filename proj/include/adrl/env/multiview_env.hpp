#pragma once

// Point-mass car on a track, observed through several partial, noisy views
// of one latent state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adrl/env/track.hpp"
#include "adrl/errors.hpp"
#include "adrl/linalg.hpp"
#include "adrl/rng.hpp"

namespace adrl {

struct TrackConfig {
  std::string kind = "loop";  // "loop" | "straight" | "polyline"
  double straight = 15.0;
  double radius = 5.0;
  double chicane_amplitude = 0.6;
  double chicane_length = 5.0;
  double spacing = 0.25;
  double length = 100.0;  // "straight"
  std::vector<Point> points;  // "polyline"
  bool closed = false;        // "polyline"
  double half_width = 1.0;

  Track build() const {
    if (kind == "loop") return Track::loop(straight, radius, chicane_amplitude, chicane_length, spacing, half_width);
    if (kind == "straight") return Track::straight(length, half_width);
    if (kind == "polyline") return Track(points, closed, half_width);
    throw ConfigError("track: unknown kind '" + kind + "'");
  }
};

struct Dynamics {
  double dt = 0.05;
  double v_max = 2.0;
  double steer_rate = 1.5;  // rad/s at full steer
  double accel_rate = 2.0;  // m/s^2 at full throttle
  int max_steps = 500;

  void validate() const {
    if (!(dt > 0.0) || !(v_max > 0.0) || !(steer_rate > 0.0) || !(accel_rate > 0.0))
      throw ConfigError("dynamics: dt, v_max, steer_rate and accel_rate must be positive");
    if (max_steps < 1) throw ConfigError("dynamics: max_steps must be positive");
  }
};

/// Latent features every view is projected from.
namespace feature {
inline constexpr int pos_x = 0, pos_y = 1, heading_sin = 2, heading_cos = 3, speed = 4, offset = 5,
                     error_sin = 6, error_cos = 7, look_1m = 8, look_2m = 9, look_4m = 10, curvature = 11;
inline constexpr int count = 12;
}  // namespace feature

/// Features zeroed out in view w (cycled modulo 4 for more views).
inline std::vector<int> default_view_mask(int w) {
  using namespace feature;
  switch (w % 4) {
    case 0: return {pos_x, pos_y};
    case 1: return {pos_x, pos_y, speed};
    case 2: return {look_1m, look_2m, look_4m, curvature};
    default: return {offset, error_sin, error_cos};
  }
}

struct ViewSpec {
  Matrix projection;     // view_dim x feature::count
  Vector bias;           // view_dim
  std::vector<int> mask;  // hidden feature indices
  double sigma2 = 0.0;
  bool irrelevant = false;
};

struct EnvConfig {
  TrackConfig track;
  Dynamics dynamics;
  int num_views = 4;
  int view_dim = 12;
  double diversity = 0.5;  // 0: every view sees the features through the identity map
  std::uint64_t view_seed = 7;
  double sigma2 = 0.0;  // environment noise on every view
  std::vector<std::vector<int>> masks;  // empty: default_view_mask

  void validate() const {
    dynamics.validate();
    if (num_views < 1) throw ConfigError("env: need at least one view");
    if (view_dim < 1) throw ConfigError("env: view_dim must be positive");
    if (!(diversity >= 0.0 && diversity <= 1.0)) throw ConfigError("env: diversity must lie in [0, 1]");
    if (sigma2 < 0.0) throw ConfigError("env: sigma2 must be nonnegative");
    if (!masks.empty() && static_cast<int>(masks.size()) != num_views)
      throw ConfigError("env: masks must list one entry per view");
    for (const auto& m : masks)
      for (int i : m)
        if (i < 0 || i >= feature::count) throw ConfigError("env: mask index out of range");
  }
};

inline std::vector<ViewSpec> build_views(const EnvConfig& cfg) {
  std::vector<ViewSpec> views;
  for (int w = 0; w < cfg.num_views; ++w) {
    Rng rng = make_rng(cfg.view_seed, "projection", static_cast<std::uint64_t>(w));
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(feature::count)));
    Matrix random(cfg.view_dim, feature::count);
    for (Eigen::Index i = 0; i < random.size(); ++i) random.data()[i] = g(rng);
    ViewSpec v;
    v.projection = (1.0 - cfg.diversity) * Matrix::Identity(cfg.view_dim, feature::count) + cfg.diversity * random;
    v.bias = Vector::Zero(cfg.view_dim);
    v.mask = cfg.masks.empty() ? default_view_mask(w) : cfg.masks[static_cast<std::size_t>(w)];
    v.sigma2 = cfg.sigma2;
    views.push_back(std::move(v));
  }
  return views;
}

/// v + N(0, sigma2 I); one normal draw per coordinate even when sigma2 = 0.
inline Vector apply_view_noise(const Vector& v, double sigma2, Rng& rng) {
  if (sigma2 < 0.0) throw ConfigError("apply_view_noise: variance must be nonnegative");
  return v + std::sqrt(sigma2) * standard_normal(v.size(), rng);
}

struct LatentState {
  Point position = Point::Zero();
  double heading = 0.0;
  double speed = 0.0;
  int steps = 0;
  double distance = 0.0;
  double lateral_offset = 0.0;
  double heading_error = 0.0;
};

struct StepResult {
  std::vector<Vector> observations;
  double reward = 0.0;
  bool terminal = false;  // episode over (left the road or hit the step cap)
  bool off_road = false;  // left the road; the only case that cuts bootstrapping
  int steps = 0;
  double distance = 0.0;  // meters driven
  double time = 0.0;      // steps * dt
};

struct TrajectoryRow {
  int step;
  double x, y, heading, speed, offset, reward;
};

class MultiViewEnv {
 public:
  explicit MultiViewEnv(EnvConfig cfg) : cfg_(std::move(cfg)), track_(cfg_.track.build()) {
    cfg_.validate();
    views_ = build_views(cfg_);
  }

  const EnvConfig& config() const { return cfg_; }
  const Track& track() const { return track_; }
  const LatentState& state() const { return state_; }
  const std::vector<ViewSpec>& views() const { return views_; }
  int num_views() const { return cfg_.num_views; }
  int view_dim() const { return cfg_.view_dim; }
  static constexpr int action_dim() { return 2; }
  bool done() const { return done_; }

  void record_trajectory(bool on) { recording_ = on; }
  const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }

  StepResult reset(std::uint64_t seed) {
    view_rngs_.clear();
    for (int w = 0; w < cfg_.num_views; ++w)
      view_rngs_.push_back(make_rng(seed, "view-noise", static_cast<std::uint64_t>(w)));
    state_ = LatentState{};
    state_.position = track_.start();
    state_.heading = track_.start_heading();
    refresh_geometry();
    done_ = false;
    trajectory_.clear();
    return result(0.0, false);
  }

  StepResult step(const Vector& action) {
    if (done_) throw StateError("step called on a finished episode");
    require_shape(action.size() == action_dim(), "step: action must be (steer, accel)");
    if (!action.allFinite()) throw NumericError("step: non-finite action");
    const Vector a = action.cwiseMax(-1.0).cwiseMin(1.0);
    const auto& d = cfg_.dynamics;
    state_.heading = wrap_angle(state_.heading + d.steer_rate * a[0] * d.dt);
    state_.speed = std::clamp(state_.speed + d.accel_rate * a[1] * d.dt, 0.0, d.v_max);
    state_.position += state_.speed * d.dt * Point(std::cos(state_.heading), std::sin(state_.heading));
    state_.distance += state_.speed * d.dt;
    ++state_.steps;
    refresh_geometry();

    const double v = state_.speed;
    const double err = state_.heading_error;
    const double reward =
        v * std::cos(err) - v * std::abs(std::sin(err)) - v * std::abs(state_.lateral_offset) / track_.half_width();
    const bool off_road = std::abs(state_.lateral_offset) > track_.half_width();
    done_ = off_road || state_.steps >= d.max_steps;
    if (recording_)
      trajectory_.push_back({state_.steps, state_.position.x(), state_.position.y(), state_.heading, v,
                             state_.lateral_offset, reward});
    return result(reward, off_road);
  }

  /// Puts the car in an arbitrary state (diagnostics and tests).
  void place(const Point& position, double heading, double speed) {
    state_.position = position;
    state_.heading = wrap_angle(heading);
    state_.speed = std::clamp(speed, 0.0, cfg_.dynamics.v_max);
    refresh_geometry();
  }

  Vector features() const {
    using namespace feature;
    const double hw = track_.half_width();
    Vector f(count);
    f[pos_x] = state_.position.x() / track_.extent();
    f[pos_y] = state_.position.y() / track_.extent();
    f[heading_sin] = std::sin(state_.heading);
    f[heading_cos] = std::cos(state_.heading);
    f[speed] = state_.speed / cfg_.dynamics.v_max;
    f[offset] = state_.lateral_offset / hw;
    f[error_sin] = std::sin(state_.heading_error);
    f[error_cos] = std::cos(state_.heading_error);
    const Point dir(std::cos(state_.heading), std::sin(state_.heading));
    const double look[3] = {1.0, 2.0, 4.0};
    for (int i = 0; i < 3; ++i) {
      const double o = track_.project(state_.position + look[i] * dir).offset / hw;
      f[look_1m + i] = std::clamp(o, -3.0, 3.0);
    }
    f[curvature] = std::sin(wrap_angle(track_.tangent_ahead(projection_, 3.0) - projection_.tangent));
    return f;
  }

  Vector noiseless_view(int w) const {
    const auto& v = views_.at(static_cast<std::size_t>(w));
    Vector f = features();
    for (int i : v.mask) f[i] = 0.0;
    return v.projection * f + v.bias;
  }

  std::vector<Vector> observe() {
    std::vector<Vector> obs;
    for (int w = 0; w < cfg_.num_views; ++w) {
      auto& rng = view_rngs_.at(static_cast<std::size_t>(w));
      const auto& v = views_[static_cast<std::size_t>(w)];
      if (v.irrelevant) obs.push_back(standard_normal(cfg_.view_dim, rng));
      else obs.push_back(apply_view_noise(noiseless_view(w), v.sigma2, rng));
    }
    return obs;
  }

  /// Raises (or lowers) the noise variance of one view.
  void perturb_view(int view, double sigma2) {
    check_view(view);
    if (sigma2 < 0.0) throw ConfigError("perturb_view: variance must be nonnegative");
    views_[static_cast<std::size_t>(view)].sigma2 = sigma2;
  }

  /// Listed views emit unit-variance noise unrelated to the car.
  void make_irrelevant(const std::vector<int>& views) {
    for (int w : views) check_view(w);
    for (int w : views) views_[static_cast<std::size_t>(w)].irrelevant = true;
  }

  void set_noise(double sigma2) {
    if (sigma2 < 0.0) throw ConfigError("set_noise: variance must be nonnegative");
    for (auto& v : views_) v.sigma2 = sigma2;
  }

 private:
  void check_view(int w) const {
    if (w < 0 || w >= cfg_.num_views) throw ConfigError("view index " + std::to_string(w) + " out of range");
  }

  void refresh_geometry() {
    projection_ = track_.project(state_.position);
    state_.lateral_offset = projection_.offset;
    state_.heading_error = wrap_angle(state_.heading - projection_.tangent);
  }

  StepResult result(double reward, bool off_road) {
    StepResult r;
    r.observations = observe();
    r.reward = reward;
    r.terminal = done_;
    r.off_road = off_road;
    r.steps = state_.steps;
    r.distance = state_.distance;
    r.time = state_.steps * cfg_.dynamics.dt;
    return r;
  }

  EnvConfig cfg_;
  Track track_;
  std::vector<ViewSpec> views_;
  std::vector<Rng> view_rngs_;
  LatentState state_;
  TrackProjection projection_;
  bool done_ = true;
  bool recording_ = false;
  std::vector<TrajectoryRow> trajectory_;
};

}  // namespace adrl
