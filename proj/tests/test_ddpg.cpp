#include <gtest/gtest.h>

#include <map>

#include "adrl/ddpg.hpp"
#include "oracles.hpp"

using namespace adrl;

namespace {

Transition make_transition(double tag, double reward = 0.0, bool terminal = false) {
  Transition t;
  t.views = {Vector::Constant(2, tag)};
  t.next_views = {Vector::Constant(2, tag + 0.5)};
  t.action = Vector::Constant(1, 0.0);
  t.reward = reward;
  t.terminal = terminal;
  return t;
}

}  // namespace

TEST(Replay, KeepsTheNewestEntriesInArrivalOrder) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.store(make_transition(i));
  ASSERT_EQ(buf.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(buf.at(i).views[0][0], static_cast<double>(i + 2));
}

TEST(Replay, UnderfullSamplingRaises) {
  ReplayBuffer buf(10);
  Rng rng(1);
  buf.store(make_transition(0));
  EXPECT_THROW(buf.sample(2, rng), UnderfullError);
  EXPECT_THROW(buf.sample(0, rng), UnderfullError);
  EXPECT_NO_THROW(buf.sample(1, rng));
}

TEST(Replay, RejectsMalformedTransitions) {
  ReplayBuffer buf(4);
  Transition t = make_transition(0);
  t.action[0] = 1.5;
  EXPECT_THROW(buf.store(t), std::invalid_argument);
  Transition u = make_transition(0);
  u.next_views.clear();
  EXPECT_THROW(buf.store(u), ShapeError);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
}

TEST(Replay, SamplingIsUniform) {
  constexpr int kItems = 10, kDraws = 100000;
  ReplayBuffer buf(kItems);
  for (int i = 0; i < kItems; ++i) buf.store(make_transition(i));
  Rng rng(99);
  std::map<double, int> count;
  for (int d = 0; d < kDraws / kItems; ++d)
    for (const auto* t : buf.sample(kItems, rng)) ++count[t->views[0][0]];
  const double expected = static_cast<double>(kDraws) / kItems;
  const double sigma = std::sqrt(kDraws * (1.0 / kItems) * (1.0 - 1.0 / kItems));
  double chi2 = 0.0;
  for (const auto& [tag, n] : count) {
    EXPECT_LE(std::abs(n - expected), 5.0 * sigma) << "item " << tag;
    chi2 += (n - expected) * (n - expected) / expected;
  }
  EXPECT_EQ(count.size(), static_cast<std::size_t>(kItems));
  EXPECT_LT(chi2, 27.88);  // chi-square, 9 dof, p = 0.001
}

TEST(Exploration, NoiseIsClippedAndAlwaysDrawn) {
  Rng a(5), b(5);
  const Vector mu = Vector::Constant(2, 0.99);
  const Vector noisy = perturb_action(mu, 10.0, a);
  EXPECT_LE(noisy.maxCoeff(), 1.0);
  EXPECT_GE(noisy.minCoeff(), -1.0);
  // a zero scale still consumes the same draws
  perturb_action(mu, 0.0, b);
  EXPECT_EQ(a(), b());
  EXPECT_THROW(perturb_action(mu, -0.1, a), ConfigError);
}

TEST(Bellman, TargetsMatchDirectEvaluation) {
  Rng rng(7);
  AgentHyper h;
  ActorCritic ac(2, 1, {6}, h, rng);
  ReplayBuffer buf(8);
  for (int i = 0; i < 8; ++i) buf.store(make_transition(0.1 * i, 0.3 * i, i % 3 == 0));
  Batch batch;
  for (std::size_t i = 0; i < buf.size(); ++i) batch.push_back(&buf.at(i));
  IdentityEncoder enc;
  const Vector y = bellman_targets(ac, batch, enc.encode_next(batch), 0.9);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Vector& s2 = batch[k]->next_views[0];
    const Vector a2 = ac.actor_target.forward(s2);
    Vector in(3);
    in << s2, a2;
    const double q2 = ac.critic_target.forward(in)[0];
    const double expect = batch[k]->reward + (batch[k]->terminal ? 0.0 : 0.9 * q2);
    EXPECT_NEAR(y[static_cast<Eigen::Index>(k)], expect, 1e-12);
  }
}

TEST(Critic, RepeatedUpdatesFitAFixedTarget) {
  Rng rng(2);
  AgentHyper h;
  h.critic_lr = 1e-2;
  ActorCritic ac(2, 1, {16}, h, rng);
  ReplayBuffer buf(16);
  for (int i = 0; i < 16; ++i) buf.store(make_transition(0.05 * i, std::sin(0.2 * i), true));
  Batch batch;
  for (std::size_t i = 0; i < buf.size(); ++i) batch.push_back(&buf.at(i));
  IdentityEncoder enc;
  const double first = critic_update(ac, batch, enc, 0.99);
  double last = first;
  for (int i = 0; i < 500; ++i) last = critic_update(ac, batch, enc, 0.99);
  EXPECT_LT(last, 0.1 * first);
}

TEST(Actor, PolicyGradientMatchesCentralDifferences) {
  Rng rng(17);
  AgentHyper h;
  for (int trial = 0; trial < 10; ++trial) {
    ActorCritic ac(3, 2, {5}, h, rng);
    Matrix s(3, 4);
    for (Eigen::Index c = 0; c < 4; ++c) s.col(c) = standard_normal(3, rng);
    const auto value = [&](const Matrix& st, const Matrix& a, Matrix& d) {
      return critic_action_value(ac.critic, ac.state_dim, st, a, d);
    };
    const auto grad = policy_gradient(ac.actor, s, value);
    DenseNet probe = ac.actor;
    const auto objective = [&](const oracle::Vec& p) {
      std::copy(p.begin(), p.end(), probe.params().begin());
      const Matrix a = probe.forward_batch(s);
      return -ac.critic.forward_batch(concat_rows(s, a)).mean();
    };
    const oracle::Vec p0(ac.actor.params().begin(), ac.actor.params().end());
    EXPECT_LE(oracle::relative_error(grad, oracle::finite_difference(objective, p0)), 1e-5);
  }
}

TEST(Actor, ClimbsAQuadraticCriticToItsMaximum) {
  Rng rng(13);
  DenseNet actor({1, 8, 1}, Activation::relu, Activation::tanh);
  actor.init_uniform(rng);
  AdamState opt(actor.num_params(), 1e-2);
  Matrix states(1, 16);
  for (Eigen::Index c = 0; c < 16; ++c) states(0, c) = -1.0 + 2.0 * c / 15.0;
  // Q(s, a) = -(a - 0.3)^2
  const auto value = [](const Matrix&, const Matrix& a, Matrix& d) {
    d = -2.0 * (a.array() - 0.3).matrix();
    return Vector(-(a.array() - 0.3).square().matrix().transpose());
  };
  for (int i = 0; i < 2000; ++i) deterministic_policy_step(actor, opt, states, value);
  const Matrix out = actor.forward_batch(states);
  EXPECT_LE((out.array() - 0.3).abs().maxCoeff(), 1e-2);
}
