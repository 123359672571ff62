#pragma once

// Critic-gated softmax attention over worker feature vectors:
//   f_w = Q^(w)(x^(w), mu^(w)(x^(w)))
//   p_w = exp(g_w f_w) / sum_l exp(g_l f_l)
//   x   = sum_w p_w x^(w)
// p_w is one scalar per worker, broadcast over feature coordinates.

#include <algorithm>
#include <cmath>
#include <vector>

#include "adrl/worker.hpp"

namespace adrl {

/// Shifted logits are floored here so every weight stays strictly positive.
inline constexpr double kMinShiftedLogit = -50.0;

inline Vector attention_weights(const Vector& f, const Vector& g) {
  require_shape(f.size() == g.size(), "attention_weights: f and g differ in length");
  if (f.size() == 0) throw ShapeError("attention_weights: empty input");
  const Vector logits = g.cwiseProduct(f);
  if (!logits.allFinite()) throw NumericError("attention_weights: non-finite logit");
  const double m = logits.maxCoeff();
  Vector p = (logits.array() - m).max(kMinShiftedLogit).exp().matrix();
  p /= p.sum();
  return p;
}

/// Column-wise weights: F is N_w x B gate values, result N_w x B.
inline Matrix attention_weights_batch(const Matrix& f, const Vector& g) {
  require_shape(f.rows() == g.size(), "attention_weights_batch: gains length mismatch");
  Matrix p(f.rows(), f.cols());
  for (Eigen::Index k = 0; k < f.cols(); ++k) p.col(k) = attention_weights(f.col(k), g);
  return p;
}

struct FusedState {
  Vector x;
  std::vector<Vector> features;
};

inline FusedState fuse(const std::vector<Vector>& features, const Vector& p) {
  require_shape(!features.empty(), "fuse: no features");
  require_shape(static_cast<Eigen::Index>(features.size()) == p.size(), "fuse: one weight per worker");
  const auto dim = features.front().size();
  Vector x = Vector::Zero(dim);
  for (std::size_t w = 0; w < features.size(); ++w) {
    require_shape(features[w].size() == dim, "fuse: feature dimensions differ");
    x += p[static_cast<Eigen::Index>(w)] * features[w];
  }
  return {x, features};
}

inline Matrix fuse_batch(const std::vector<Matrix>& features, const Matrix& p) {
  require_shape(!features.empty() && static_cast<Eigen::Index>(features.size()) == p.rows(),
                "fuse_batch: one weight row per worker");
  Matrix x = Matrix::Zero(features.front().rows(), features.front().cols());
  for (std::size_t w = 0; w < features.size(); ++w) {
    require_shape(features[w].rows() == x.rows() && features[w].cols() == x.cols(),
                  "fuse_batch: feature shapes differ");
    x.noalias() += features[w] * p.row(static_cast<Eigen::Index>(w)).asDiagonal();
  }
  return x;
}

struct FusionGradients {
  std::vector<Matrix> features;  // d loss / d x^(w), per worker
  Vector gains;                  // d loss / d g
};

/// Reverse pass of fuse(attention_weights(F, g)). F is treated as a constant.
inline FusionGradients fuse_backward(const std::vector<Matrix>& features, const Matrix& p, const Matrix& f,
                                     const Matrix& x, const Matrix& d_x) {
  const auto n = static_cast<Eigen::Index>(features.size());
  FusionGradients out;
  out.gains = Vector::Zero(n);
  out.features.reserve(features.size());
  for (Eigen::Index w = 0; w < n; ++w) {
    const auto& xw = features[static_cast<std::size_t>(w)];
    out.features.push_back(d_x * p.row(w).asDiagonal());
    // d p_w / d z_v = p_w (delta_wv - p_v) collapses to p_w (x^(w) - x) . d_x
    const Eigen::RowVectorXd dz = p.row(w).cwiseProduct(((xw - x).cwiseProduct(d_x)).colwise().sum());
    out.gains[w] = dz.dot(f.row(w));
  }
  return out;
}

/// Learnable gains and the last computed gate values / weights.
struct AttentionGate {
  Vector gains;
  Vector last_f;
  Vector last_p;
  AdamState opt;

  AttentionGate() = default;
  AttentionGate(int workers, double lr) : gains(Vector::Ones(workers)), opt(workers, lr) {}

  int size() const { return static_cast<int>(gains.size()); }

  FusedState forward(const std::vector<Vector>& features, const Vector& f) {
    last_f = f;
    last_p = attention_weights(f, gains);
    return fuse(features, last_p);
  }
};

/// f_w from each worker's own critic at its own proposed action.
inline Vector gate_values(const std::vector<Worker>& workers, const std::vector<Vector>& observations) {
  require_shape(workers.size() == observations.size(), "gate_values: one observation per worker");
  Vector f(static_cast<Eigen::Index>(workers.size()));
  for (std::size_t w = 0; w < workers.size(); ++w) f[static_cast<Eigen::Index>(w)] = workers[w].gate_value(observations[w]);
  return f;
}

/// Everything the global network sees at one step.
struct AttentionStep {
  std::vector<Vector> features;
  std::vector<Vector> proposals;
  Vector f;
  Vector p;
  Vector x;
};

inline AttentionStep attend(const std::vector<Worker>& workers, const AttentionGate& gate,
                            const std::vector<Vector>& observations) {
  require_shape(workers.size() == observations.size(), "attend: one observation per worker");
  AttentionStep s;
  s.f.resize(static_cast<Eigen::Index>(workers.size()));
  for (std::size_t w = 0; w < workers.size(); ++w) {
    s.features.push_back(workers[w].features(observations[w]));
    s.proposals.push_back(workers[w].heads.act(s.features.back()));
    s.f[static_cast<Eigen::Index>(w)] = workers[w].heads.q(s.features.back(), s.proposals.back());
  }
  s.p = attention_weights(s.f, gate.gains);
  s.x = fuse(s.features, s.p).x;
  return s;
}

/// StateEncoder for the global agent. View w of a transition feeds worker w.
/// The critic gradient flows through the fusion into every worker trunk and
/// the gains; encoders stay frozen and gate values are constants.
class AttentionEncoder {
 public:
  AttentionEncoder(std::vector<Worker>& workers, AttentionGate& gate) : workers_(workers), gate_(gate) {}

  Matrix encode(const Batch& b) { return run(b, false, true); }
  Matrix encode_next(const Batch& b) { return run(b, true, false); }
  Matrix encode_detached(const Batch& b) { return run(b, false, false); }

  void backward(const Matrix& d_states) {
    const FusionGradients g = fuse_backward(features_, p_, f_, x_, d_states);
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      auto& trunk = workers_[w].view.trunk;
      Buffer grad(trunk.num_params(), 0.0);
      trunk.backward(tapes_[w], g.features[w], grad);
      check_finite(grad, "trunk gradient (joint)");
      optimizer_step(workers_[w].view.trunk_opt, trunk.params(), grad);
    }
    check_finite({g.gains.data(), static_cast<std::size_t>(g.gains.size())}, "gain gradient");
    optimizer_step(gate_.opt, {gate_.gains.data(), static_cast<std::size_t>(gate_.gains.size())},
                   {g.gains.data(), static_cast<std::size_t>(g.gains.size())});
  }

  const Matrix& weights() const { return p_; }

 private:
  Matrix run(const Batch& b, bool next, bool record) {
    const auto n = workers_.size();
    std::vector<Matrix> feats(n);
    Matrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(b.size()));
    if (record) tapes_.resize(n);
    for (std::size_t w = 0; w < n; ++w) {
      const auto& worker = workers_[w];
      const Matrix e = worker.view.encoder.forward_batch(stack_view(b, w, next));
      feats[w] = record ? worker.view.trunk.forward_batch(e, tapes_[w]) : worker.view.trunk.forward_batch(e);
      const Matrix a = worker.heads.actor.forward_batch(feats[w]);
      f.row(static_cast<Eigen::Index>(w)) = worker.heads.critic.forward_batch(concat_rows(feats[w], a));
    }
    Matrix p = attention_weights_batch(f, gate_.gains);
    Matrix x = fuse_batch(feats, p);
    if (record) {
      features_ = std::move(feats);
      p_ = std::move(p);
      f_ = std::move(f);
      x_ = x;
    }
    return x;
  }

  std::vector<Worker>& workers_;
  AttentionGate& gate_;
  std::vector<Tape> tapes_;
  std::vector<Matrix> features_;
  Matrix p_;
  Matrix f_;
  Matrix x_;
};

}  // namespace adrl
