#pragma once

// Deterministic actor-critic learner: Bellman-residual critic regression
// against target networks and the sampled deterministic policy gradient.
// State construction is delegated to a StateEncoder so the same update serves
// single-view workers, the attention-fused global agent and feature concatenation.

#include <algorithm>
#include <concepts>
#include <stdexcept>
#include <vector>

#include "adrl/nn.hpp"
#include "adrl/replay.hpp"

namespace adrl {

struct AgentHyper {
  double gamma = 0.99;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  int batch_size = 32;
  double tau = 1e-3;
  std::size_t replay_capacity = 100000;
  std::size_t warmup = 1000;  // transitions stored before updates begin

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (replay_capacity == 0) throw ConfigError("replay capacity must be positive");
  }
};

/// Turns a batch of stored transitions into state matrices (one column per sample).
///  encode()          online states, remembering what backward() needs
///  encode_next()     successor states for the bootstrap target, no gradient
///  encode_detached() online states for the actor step, no gradient
///  backward(d)       consumes d(loss)/d(states) of the last encode()
template <class E>
concept StateEncoder = requires(E& e, const Batch& b, const Matrix& d) {
  { e.encode(b) } -> std::convertible_to<Matrix>;
  { e.encode_next(b) } -> std::convertible_to<Matrix>;
  { e.encode_detached(b) } -> std::convertible_to<Matrix>;
  e.backward(d);
};

inline Matrix stack_view(const Batch& b, std::size_t view, bool next) {
  require_shape(!b.empty(), "stack_view: empty batch");
  const auto& first = next ? b.front()->next_views.at(view) : b.front()->views.at(view);
  Matrix s(first.size(), static_cast<Eigen::Index>(b.size()));
  for (std::size_t k = 0; k < b.size(); ++k)
    s.col(static_cast<Eigen::Index>(k)) = next ? b[k]->next_views.at(view) : b[k]->views.at(view);
  return s;
}

/// States are the raw observation of one view.
struct IdentityEncoder {
  std::size_t view = 0;

  Matrix encode(const Batch& b) { return stack_view(b, view, false); }
  Matrix encode_next(const Batch& b) { return stack_view(b, view, true); }
  Matrix encode_detached(const Batch& b) { return stack_view(b, view, false); }
  void backward(const Matrix&) {}
};

inline Matrix stack_actions(const Batch& b) {
  Matrix a(b.front()->action.size(), static_cast<Eigen::Index>(b.size()));
  for (std::size_t k = 0; k < b.size(); ++k) a.col(static_cast<Eigen::Index>(k)) = b[k]->action;
  return a;
}

inline Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  require_shape(top.cols() == bottom.cols(), "concat_rows: column mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

/// Actor and critic heads with their target copies and optimizers.
/// The actor ends in tanh (action box [-1, 1]); the critic reads [state; action].
struct ActorCritic {
  int state_dim = 0;
  int action_dim = 0;
  DenseNet actor;
  DenseNet critic;
  DenseNet actor_target;
  DenseNet critic_target;
  AdamState actor_opt;
  AdamState critic_opt;

  ActorCritic() = default;

  ActorCritic(int state, int action, const std::vector<int>& hidden, const AgentHyper& hyper, Rng& rng)
      : state_dim(state), action_dim(action) {
    std::vector<int> a_sizes{state};
    a_sizes.insert(a_sizes.end(), hidden.begin(), hidden.end());
    a_sizes.push_back(action);
    std::vector<int> c_sizes{state + action};
    c_sizes.insert(c_sizes.end(), hidden.begin(), hidden.end());
    c_sizes.push_back(1);
    actor = DenseNet(a_sizes, Activation::relu, Activation::tanh);
    critic = DenseNet(c_sizes, Activation::relu, Activation::identity);
    actor.init_uniform(rng);
    critic.init_uniform(rng);
    actor_target = actor;
    critic_target = critic;
    actor_opt = AdamState(actor.num_params(), hyper.actor_lr);
    critic_opt = AdamState(critic.num_params(), hyper.critic_lr);
  }

  Vector act(const Vector& state) const { return actor.forward(state); }

  double q(const Vector& state, const Vector& action) const {
    Vector in(state.size() + action.size());
    in << state, action;
    return critic.forward(in)[0];
  }

  void soft_update_targets(double tau) {
    soft_update(actor, actor_target, tau);
    soft_update(critic, critic_target, tau);
  }
};

/// clip(mu(state) + epsilon * z, -1, 1) with z ~ N(0, I). One normal draw per
/// action dimension is consumed whatever epsilon is.
inline Vector select_action(const DenseNet& actor, const Vector& state, double epsilon, Rng& rng) {
  if (epsilon < 0.0) throw ConfigError("select_action: epsilon must be nonnegative");
  Vector mu = actor.forward(state);
  return (mu + epsilon * standard_normal(mu.size(), rng)).cwiseMax(-1.0).cwiseMin(1.0);
}

/// Same rule starting from an already computed mu(state).
inline Vector perturb_action(const Vector& mu, double epsilon, Rng& rng) {
  if (epsilon < 0.0) throw ConfigError("perturb_action: epsilon must be nonnegative");
  return (mu + epsilon * standard_normal(mu.size(), rng)).cwiseMax(-1.0).cwiseMin(1.0);
}

/// Bootstrap targets y = r + gamma * (1 - terminal) * Qbar(s', mubar(s')).
inline Vector bellman_targets(const ActorCritic& ac, const Batch& batch, const Matrix& next_states,
                              double gamma) {
  const Matrix next_actions = ac.actor_target.forward_batch(next_states);
  const Matrix next_q = ac.critic_target.forward_batch(concat_rows(next_states, next_actions));
  Vector y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    y[i] = batch[k]->reward + (batch[k]->terminal ? 0.0 : gamma * next_q(0, i));
  }
  return y;
}

/// One Adam step on the critic against the mean squared Bellman residual.
/// The state gradient is handed to the encoder. Returns the pre-step batch loss.
template <StateEncoder Encoder>
double critic_update(ActorCritic& ac, const Batch& batch, Encoder& encoder, double gamma) {
  if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
  const Matrix states = encoder.encode(batch);
  const Matrix next_states = encoder.encode_next(batch);
  require_shape(states.rows() == ac.state_dim, "critic_update: encoder state size mismatch");
  const Vector y = bellman_targets(ac, batch, next_states, gamma);

  Tape tape;
  const Matrix q = ac.critic.forward_batch(concat_rows(states, stack_actions(batch)), tape);
  const double n = static_cast<double>(batch.size());
  const Eigen::RowVectorXd residual = y.transpose() - q.row(0);
  const double loss = residual.squaredNorm() / n;

  const Matrix d_q = (-2.0 / n) * residual;
  Buffer grad(ac.critic.num_params(), 0.0);
  const Matrix d_in = ac.critic.backward(tape, d_q, grad);
  check_finite(grad, "critic gradient");
  optimizer_step(ac.critic_opt, ac.critic.params(), grad);
  encoder.backward(d_in.topRows(ac.state_dim));
  return loss;
}

/// Gradient of -mean_k Q(s_k, mu(s_k)) with respect to the actor parameters.
/// `action_value` maps (states, actions) to Q per column and fills dQ/da.
template <class ActionValue>
Buffer policy_gradient(const DenseNet& actor, const Matrix& states, ActionValue&& action_value,
                                    double* mean_q = nullptr) {
  Tape tape;
  const Matrix actions = actor.forward_batch(states, tape);
  Matrix d_q_d_a = Matrix::Zero(actions.rows(), actions.cols());
  const Vector q = action_value(states, actions, d_q_d_a);
  const double n = static_cast<double>(states.cols());
  Buffer grad(actor.num_params(), 0.0);
  actor.backward(tape, (-1.0 / n) * d_q_d_a, grad);
  if (mean_q) *mean_q = q.mean();
  return grad;
}

/// One Adam step on the actor along the policy gradient. Returns mean Q before the step.
template <class ActionValue>
double deterministic_policy_step(DenseNet& actor, AdamState& opt, const Matrix& states,
                                 ActionValue&& action_value) {
  double mean_q = 0.0;
  const auto grad = policy_gradient(actor, states, std::forward<ActionValue>(action_value), &mean_q);
  check_finite(grad, "actor gradient");
  optimizer_step(opt, actor.params(), grad);
  return mean_q;
}

/// Q(s, a) and dQ/da from a critic network over [state; action].
inline Vector critic_action_value(const DenseNet& critic, int state_dim, const Matrix& states,
                                  const Matrix& actions, Matrix& d_q_d_a) {
  Tape tape;
  const Matrix q = critic.forward_batch(concat_rows(states, actions), tape);
  const Matrix d_in = critic.backward(tape, Matrix::Ones(1, q.cols()));
  d_q_d_a = d_in.bottomRows(d_in.rows() - state_dim);
  return q.row(0).transpose();
}

template <StateEncoder Encoder>
double actor_update(ActorCritic& ac, const Batch& batch, Encoder& encoder) {
  if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
  const Matrix states = encoder.encode_detached(batch);
  require_shape(states.rows() == ac.state_dim, "actor_update: encoder state size mismatch");
  return deterministic_policy_step(
      ac.actor, ac.actor_opt, states, [&](const Matrix& s, const Matrix& a, Matrix& d) {
        return critic_action_value(ac.critic, ac.state_dim, s, a, d);
      });
}

}  // namespace adrl
