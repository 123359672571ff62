#include <gtest/gtest.h>

#include <numbers>

#include "adrl/env/multiview_env.hpp"

using namespace adrl;

namespace {

EnvConfig straight_env(int views = 2) {
  EnvConfig c;
  c.track.kind = "straight";
  c.track.length = 200.0;
  c.num_views = views;
  return c;
}

}  // namespace

TEST(Track, ProjectionSignAndTangent) {
  const Track t = Track::straight(10.0, 1.0);
  const auto left = t.project(Point(3.0, 0.4));
  EXPECT_NEAR(left.offset, 0.4, 1e-15);
  EXPECT_NEAR(left.tangent, 0.0, 1e-15);
  EXPECT_NEAR(t.project(Point(3.0, -0.7)).offset, -0.7, 1e-15);
  // open ends extend the first and last segment
  EXPECT_NEAR(t.project(Point(-5.0, 0.2)).offset, 0.2, 1e-15);
}

TEST(Track, LoopIsClosedAndCounterClockwise) {
  const Track t = Track::loop(15.0, 5.0, 0.6, 5.0, 0.25, 1.0);
  EXPECT_TRUE(t.closed());
  EXPECT_NEAR(t.length(), 2 * 15.0 + 2 * std::numbers::pi * 5.0, 1.0);  // chicanes add a little
  EXPECT_NEAR(t.start_heading(), 0.0, 1e-12);
  // the centre of a counter-clockwise loop lies to the left
  EXPECT_GT(t.project(Point(0.0, -4.5)).offset, 0.0);
  EXPECT_THROW(Track({Point(0, 0)}, false, 1.0), ConfigError);
  EXPECT_THROW(Track::straight(10.0, 0.0), ConfigError);
}

TEST(Env, KinematicsFollowTheUpdateRule) {
  MultiViewEnv env(straight_env());
  env.reset(1);
  env.place(Point(5.0, 0.1), 0.2, 1.0);
  const auto& d = env.config().dynamics;
  Vector a(2);
  a << 0.5, -0.25;
  const StepResult r = env.step(a);
  const double heading = 0.2 + d.steer_rate * 0.5 * d.dt;
  const double speed = 1.0 + d.accel_rate * -0.25 * d.dt;
  const Point pos = Point(5.0, 0.1) + speed * d.dt * Point(std::cos(heading), std::sin(heading));
  EXPECT_NEAR(env.state().heading, heading, 1e-15);
  EXPECT_NEAR(env.state().speed, speed, 1e-15);
  EXPECT_NEAR((env.state().position - pos).norm(), 0.0, 1e-15);
  const double expect_reward = speed * std::cos(heading) - speed * std::abs(std::sin(heading)) -
                               speed * std::abs(pos.y()) / env.track().half_width();
  EXPECT_NEAR(r.reward, expect_reward, 1e-12);
  EXPECT_FALSE(r.terminal);
}

TEST(Env, ActionsAreClippedAndSpeedIsBounded) {
  MultiViewEnv env(straight_env());
  env.reset(2);
  for (int i = 0; i < 200; ++i) {
    const StepResult r = env.step((Vector(2) << 0.0, 5.0).finished());
    if (r.terminal) break;
  }
  EXPECT_LE(env.state().speed, env.config().dynamics.v_max);
  EXPECT_NEAR(env.state().speed, env.config().dynamics.v_max, 1e-12);
  EXPECT_THROW(env.step((Vector(3) << 0, 0, 0).finished()), ShapeError);
}

TEST(Env, LeavingTheRoadTerminates) {
  MultiViewEnv env(straight_env());
  env.reset(3);
  env.place(Point(5.0, 0.05), std::numbers::pi / 2, 2.0);
  StepResult r;
  int steps = 0;
  do {
    r = env.step((Vector(2) << 0.0, 0.0).finished());
    ++steps;
  } while (!r.terminal);
  EXPECT_TRUE(r.off_road);
  EXPECT_GT(std::abs(env.state().lateral_offset), env.track().half_width());
  EXPECT_EQ(steps, 10);  // 0.1 m per step from 0.05 m, half-width 1 m
  EXPECT_THROW(env.step(Vector::Zero(2)), StateError);
}

TEST(Env, StepCapEndsTheEpisodeWithoutOffRoad) {
  EnvConfig c = straight_env();
  c.dynamics.max_steps = 7;
  MultiViewEnv env(c);
  StepResult r = env.reset(4);
  int n = 0;
  while (!r.terminal) {
    r = env.step(Vector::Zero(2));
    ++n;
  }
  EXPECT_EQ(n, 7);
  EXPECT_FALSE(r.off_road);
  EXPECT_NEAR(r.time, 7 * c.dynamics.dt, 1e-15);
}

TEST(Env, ViewsHideTheirMaskedFeatures) {
  MultiViewEnv env(straight_env(4));
  env.reset(5);
  env.place(Point(3.0, 0.3), 0.1, 1.2);
  for (int w = 0; w < 4; ++w) {
    const auto& v = env.views()[static_cast<std::size_t>(w)];
    Vector f = env.features();
    for (int i : v.mask) f[i] = 0.0;
    EXPECT_LE((env.noiseless_view(w) - v.projection * f).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Env, ObservationNoiseHasTheConfiguredVariance) {
  EnvConfig c = straight_env(1);
  c.sigma2 = 0.05;
  MultiViewEnv env(c);
  constexpr int kDraws = 4000;
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
  for (int k = 0; k < kDraws; ++k) {
    const StepResult r = env.reset(static_cast<std::uint64_t>(k));
    const Vector e = r.observations[0] - env.noiseless_view(0);
    sum += e.sum();
    sumsq += e.squaredNorm();
    n += e.size();
  }
  const double var = sumsq / n - (sum / n) * (sum / n);
  // sample variance of n Gaussian draws has sd sigma^2 sqrt(2 / n)
  EXPECT_NEAR(var, 0.05, 5 * 0.05 * std::sqrt(2.0 / n));
}

TEST(Env, PerturbationTouchesOnlyTheChosenView) {
  MultiViewEnv env(straight_env(3));
  env.perturb_view(1, 0.05);
  EXPECT_EQ(env.views()[0].sigma2, 0.0);
  EXPECT_EQ(env.views()[1].sigma2, 0.05);
  const StepResult r = env.reset(6);
  EXPECT_EQ(r.observations[0], env.noiseless_view(0));
  EXPECT_NE(r.observations[1], env.noiseless_view(1));
  EXPECT_THROW(env.perturb_view(3, 0.1), ConfigError);
  EXPECT_THROW(env.perturb_view(0, -0.1), ConfigError);
}

TEST(Env, IrrelevantViewCarriesNoStateInformation) {
  EnvConfig c;
  c.num_views = 2;
  MultiViewEnv env(c);
  env.make_irrelevant({1});
  // correlate view 1 with the latent features over a rollout
  std::vector<Vector> obs, feats;
  StepResult r = env.reset(7);
  Rng rng(3);
  for (int i = 0; i < 3000; ++i) {
    if (r.terminal) r = env.reset(static_cast<std::uint64_t>(100 + i));
    obs.push_back(r.observations[1]);
    feats.push_back(env.features());
    r = env.step((Vector(2) << 0.3 * standard_normal(1, rng)[0], 0.5).finished());
  }
  const auto n = static_cast<double>(obs.size());
  for (int i : {feature::speed, feature::offset, feature::heading_cos})
    for (Eigen::Index j = 0; j < obs.front().size(); ++j) {
      double mx = 0, my = 0, sxy = 0, sxx = 0, syy = 0;
      for (std::size_t k = 0; k < obs.size(); ++k) {
        mx += feats[k][i];
        my += obs[k][j];
      }
      mx /= n;
      my /= n;
      for (std::size_t k = 0; k < obs.size(); ++k) {
        sxy += (feats[k][i] - mx) * (obs[k][j] - my);
        sxx += (feats[k][i] - mx) * (feats[k][i] - mx);
        syy += (obs[k][j] - my) * (obs[k][j] - my);
      }
      EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.1) << "feature " << i << " coordinate " << j;
    }
}

TEST(Env, SameSeedSameObservations) {
  EnvConfig c;
  c.sigma2 = 0.01;
  MultiViewEnv a(c), b(c);
  StepResult ra = a.reset(42), rb = b.reset(42);
  for (int i = 0; i < 50 && !ra.terminal; ++i) {
    for (std::size_t w = 0; w < ra.observations.size(); ++w) EXPECT_EQ(ra.observations[w], rb.observations[w]);
    ra = a.step((Vector(2) << 0.1, 0.5).finished());
    rb = b.step((Vector(2) << 0.1, 0.5).finished());
  }
}

TEST(Env, ConfigValidation) {
  EnvConfig c;
  c.num_views = 0;
  EXPECT_THROW(MultiViewEnv{c}, ConfigError);
  c = EnvConfig{};
  c.masks = {{0}};
  EXPECT_THROW(MultiViewEnv{c}, ConfigError);
  c = EnvConfig{};
  c.track.kind = "spiral";
  EXPECT_THROW(MultiViewEnv{c}, ConfigError);
}
