#pragma once

#include <cstdint>
#include <vector>

#include "adrl/ddpg.hpp"

namespace adrl {

/// Layer widths. A view passes through the view-dependent encoder, then the
/// task-dependent trunk whose output is the worker's feature vector x^(w).
struct NetSizes {
  std::vector<int> encoder{32};
  std::vector<int> trunk{32};
  std::vector<int> head{64, 64};

  int feature_dim() const { return trunk.empty() ? encoder.back() : trunk.back(); }
};

/// Encoder + trunk with target copies. The encoder is frozen during joint
/// (stage-2) training; the trunk is shared with the global network's gradient.
struct ViewEncoder {
  DenseNet encoder;
  DenseNet trunk;
  DenseNet encoder_target;
  DenseNet trunk_target;
  AdamState encoder_opt;
  AdamState trunk_opt;

  ViewEncoder() = default;

  ViewEncoder(int obs_dim, const NetSizes& sizes, double lr, Rng& rng) {
    require_shape(!sizes.encoder.empty() && !sizes.trunk.empty(), "ViewEncoder: empty layer spec");
    std::vector<int> e{obs_dim};
    e.insert(e.end(), sizes.encoder.begin(), sizes.encoder.end());
    std::vector<int> t{sizes.encoder.back()};
    t.insert(t.end(), sizes.trunk.begin(), sizes.trunk.end());
    encoder = DenseNet(e, Activation::relu, Activation::relu);
    trunk = DenseNet(t, Activation::relu, Activation::relu);
    encoder.init_uniform(rng);
    trunk.init_uniform(rng);
    encoder_target = encoder;
    trunk_target = trunk;
    encoder_opt = AdamState(encoder.num_params(), lr);
    trunk_opt = AdamState(trunk.num_params(), lr);
  }

  int obs_dim() const { return encoder.input_size(); }
  int feature_dim() const { return trunk.output_size(); }

  Vector features(const Vector& obs) const { return trunk.forward(encoder.forward(obs)); }
  Matrix features_batch(const Matrix& obs) const { return trunk.forward_batch(encoder.forward_batch(obs)); }
  Matrix target_features_batch(const Matrix& obs) const {
    return trunk_target.forward_batch(encoder_target.forward_batch(obs));
  }

  void soft_update(double tau) {
    adrl::soft_update(encoder, encoder_target, tau);
    adrl::soft_update(trunk, trunk_target, tau);
  }
};

struct UpdateStats {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

/// Per-view learner: view encoder, actor/critic heads on x^(w), private replay.
class Worker {
 public:
  ViewEncoder view;
  ActorCritic heads;
  ReplayBuffer buffer;
  AgentHyper hyper;

  Worker(int obs_dim, int action_dim, const NetSizes& sizes, const AgentHyper& h, Rng& init)
      : view(obs_dim, sizes, h.critic_lr, init),
        heads(sizes.feature_dim(), action_dim, sizes.head, h, init),
        buffer(h.replay_capacity),
        hyper(h) {
    hyper.validate();
  }

  int obs_dim() const { return view.obs_dim(); }
  int action_dim() const { return heads.action_dim; }
  int feature_dim() const { return view.feature_dim(); }

  Vector features(const Vector& obs) const { return view.features(obs); }
  Vector propose(const Vector& obs) const { return heads.act(features(obs)); }

  /// Q^(w)(x, mu^(w)(x)) on the worker's own view.
  double gate_value(const Vector& obs) const {
    const Vector x = features(obs);
    return heads.q(x, heads.act(x));
  }

  bool ready() const { return buffer.size() >= std::max<std::size_t>(hyper.warmup, hyper.batch_size); }

  /// One critic step (into heads, trunk and encoder), one actor step, target tracking.
  UpdateStats update(Rng& replay_rng);

  void soft_update_targets() {
    heads.soft_update_targets(hyper.tau);
    view.soft_update(hyper.tau);
  }
};

/// StateEncoder over a worker's own view: gradients reach trunk and encoder.
class WorkerEncoder {
 public:
  explicit WorkerEncoder(Worker& w, std::size_t view_index = 0) : w_(w), index_(view_index) {}

  Matrix encode(const Batch& b) {
    const Matrix obs = stack_view(b, index_, false);
    const Matrix e = w_.view.encoder.forward_batch(obs, enc_tape_);
    return w_.view.trunk.forward_batch(e, trunk_tape_);
  }
  Matrix encode_next(const Batch& b) { return w_.view.target_features_batch(stack_view(b, index_, true)); }
  Matrix encode_detached(const Batch& b) { return w_.view.features_batch(stack_view(b, index_, false)); }

  void backward(const Matrix& d_states) {
    auto& v = w_.view;
    Buffer g_trunk(v.trunk.num_params(), 0.0);
    Buffer g_enc(v.encoder.num_params(), 0.0);
    const Matrix d_e = v.trunk.backward(trunk_tape_, d_states, g_trunk);
    v.encoder.backward(enc_tape_, d_e, g_enc);
    check_finite(g_trunk, "trunk gradient");
    check_finite(g_enc, "encoder gradient");
    optimizer_step(v.trunk_opt, v.trunk.params(), g_trunk);
    optimizer_step(v.encoder_opt, v.encoder.params(), g_enc);
  }

 private:
  Worker& w_;
  std::size_t index_;
  Tape enc_tape_;
  Tape trunk_tape_;
};

inline UpdateStats Worker::update(Rng& replay_rng) {
  const Batch batch = buffer.sample(static_cast<std::size_t>(hyper.batch_size), replay_rng);
  WorkerEncoder enc(*this);
  UpdateStats s;
  s.critic_loss = critic_update(heads, batch, enc, hyper.gamma);
  s.mean_q = actor_update(heads, batch, enc);
  soft_update_targets();
  return s;
}

}  // namespace adrl
