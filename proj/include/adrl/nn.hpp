#pragma once

// Dense feed-forward networks with hand-written reverse-mode gradients.
//
// Parameters live in one flat buffer so optimizers, target tracking and
// snapshots work on plain spans. Layer i occupies [W_i (out x in, row-major), b_i].

#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "adrl/errors.hpp"
#include "adrl/linalg.hpp"
#include "adrl/rng.hpp"

namespace adrl {

enum class Activation { relu, tanh, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

struct LayerShape {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  std::size_t offset = 0;  // start of W in the flat buffer; b follows W

  std::size_t weight_count() const { return static_cast<std::size_t>(in) * out; }
  std::size_t param_count() const { return weight_count() + out; }
};

/// Activations recorded during a taped forward pass; values[0] is the input.
struct Tape {
  std::vector<Matrix> values;
};

class DenseNet {
 public:
  DenseNet() = default;

  /// sizes = {in, h1, ..., out}; one activation per layer. Parameters start at zero.
  DenseNet(const std::vector<int>& sizes, const std::vector<Activation>& acts) {
    require_shape(sizes.size() >= 2, "DenseNet needs at least one layer");
    require_shape(acts.size() + 1 == sizes.size(), "DenseNet: one activation per layer");
    std::size_t offset = 0;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      require_shape(sizes[i] > 0 && sizes[i + 1] > 0, "DenseNet: layer sizes must be positive");
      LayerShape l{sizes[i], sizes[i + 1], acts[i], offset};
      offset += l.param_count();
      layers_.push_back(l);
    }
    params_.assign(offset, 0.0);
  }

  /// Hidden layers share one activation; the last layer gets `out_act`.
  DenseNet(const std::vector<int>& sizes, Activation hidden, Activation out_act)
      : DenseNet(sizes, hidden_acts(sizes, hidden, out_act)) {}

  /// Uniform in +-1/sqrt(fan_in) for weights and biases alike.
  void init_uniform(Rng& rng) {
    for (const auto& l : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t k = 0; k < l.param_count(); ++k) params_[l.offset + k] = dist(rng);
    }
  }

  int input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<LayerShape>& layers() const { return layers_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Eigen::Map<const RowMatrix> weight(std::size_t i) const {
    const auto& l = layers_.at(i);
    return {params_.data() + l.offset, l.out, l.in};
  }
  Eigen::Map<RowMatrix> weight(std::size_t i) {
    const auto& l = layers_.at(i);
    return {params_.data() + l.offset, l.out, l.in};
  }
  Eigen::Map<const Vector> bias(std::size_t i) const {
    const auto& l = layers_.at(i);
    return {params_.data() + l.offset + l.weight_count(), l.out};
  }
  Eigen::Map<Vector> bias(std::size_t i) {
    const auto& l = layers_.at(i);
    return {params_.data() + l.offset + l.weight_count(), l.out};
  }

  Vector forward(const Vector& x) const {
    if (x.size() != input_size()) throw ShapeError(shape_message(x.size()));
    Vector a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Vector z = weight(i) * a + bias(i);
      activate(z, layers_[i].act);
      a = std::move(z);
    }
    return a;
  }

  Matrix forward_batch(const Matrix& x) const {
    if (x.rows() != input_size()) throw ShapeError(shape_message(x.rows()));
    Matrix a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = weight(i) * a;
      z.colwise() += bias(i);
      activate(z, layers_[i].act);
      a = std::move(z);
    }
    return a;
  }

  Matrix forward_batch(const Matrix& x, Tape& tape) const {
    if (x.rows() != input_size()) throw ShapeError(shape_message(x.rows()));
    tape.values.resize(layers_.size() + 1);
    tape.values[0] = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = weight(i) * tape.values[i];
      z.colwise() += bias(i);
      activate(z, layers_[i].act);
      tape.values[i + 1] = std::move(z);
    }
    return tape.values.back();
  }

  /// Back-propagates d(loss)/d(output) through a taped pass. Parameter
  /// gradients are accumulated into `grad` (skipped when empty); the return
  /// value is d(loss)/d(input).
  Matrix backward(const Tape& tape, const Matrix& d_out, std::span<double> grad = {}) const {
    require_shape(tape.values.size() == layers_.size() + 1, "backward: tape does not match net");
    require_shape(d_out.rows() == output_size() && d_out.cols() == tape.values.back().cols(),
                  "backward: output gradient shape mismatch");
    const bool want_params = !grad.empty();
    if (want_params) require_shape(grad.size() == params_.size(), "backward: gradient buffer size");

    Matrix delta = d_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& l = layers_[i];
      apply_derivative(delta, tape.values[i + 1], l.act);
      if (want_params) {
        Eigen::Map<RowMatrix> gw(grad.data() + l.offset, l.out, l.in);
        Eigen::Map<Vector> gb(grad.data() + l.offset + l.weight_count(), l.out);
        gw.noalias() += delta * tape.values[i].transpose();
        gb += delta.rowwise().sum();
      }
      delta = weight(i).transpose() * delta;
    }
    return delta;
  }

  void save(std::ostream& os) const {
    os << "adrl-densenet 1\n" << "layers " << layers_.size() << "\n";
    for (const auto& l : layers_) os << "layer " << l.in << ' ' << l.out << ' ' << to_string(l.act) << "\n";
    os.precision(17);
    for (double p : params_) os << p << "\n";
  }

  static DenseNet load(std::istream& is) {
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "adrl-densenet" || version != 1) throw ConfigError("not an adrl-densenet v1 snapshot");
    std::string tag;
    std::size_t n = 0;
    is >> tag >> n;
    if (tag != "layers" || n == 0) throw ConfigError("snapshot: bad layer count");
    std::vector<int> sizes;
    std::vector<Activation> acts;
    for (std::size_t i = 0; i < n; ++i) {
      int in = 0, out = 0;
      std::string act;
      is >> tag >> in >> out >> act;
      if (tag != "layer") throw ConfigError("snapshot: expected layer line");
      if (i == 0) sizes.push_back(in);
      else if (sizes.back() != in) throw ConfigError("snapshot: layer sizes do not chain");
      sizes.push_back(out);
      acts.push_back(activation_from_string(act));
    }
    DenseNet net(sizes, acts);
    for (double& p : net.params_) {
      if (!(is >> p)) throw ConfigError("snapshot: truncated parameter block");
    }
    return net;
  }

 private:
  static std::vector<Activation> hidden_acts(const std::vector<int>& sizes, Activation hidden,
                                             Activation out_act) {
    require_shape(sizes.size() >= 2, "DenseNet needs at least one layer");
    std::vector<Activation> acts(sizes.size() - 1, hidden);
    acts.back() = out_act;
    return acts;
  }

  template <class Derived>
  static void activate(Eigen::MatrixBase<Derived>& z, Activation act) {
    switch (act) {
      case Activation::relu: z = z.cwiseMax(0.0); break;
      case Activation::tanh: z = z.array().tanh().matrix(); break;
      case Activation::identity: break;
    }
  }

  // delta *= f'(z) expressed through the activation output y = f(z)
  static void apply_derivative(Matrix& delta, const Matrix& y, Activation act) {
    switch (act) {
      case Activation::relu: delta = (y.array() > 0.0).select(delta, 0.0); break;
      case Activation::tanh: delta.array() *= 1.0 - y.array().square(); break;
      case Activation::identity: break;
    }
  }

  std::string shape_message(Eigen::Index got) const {
    std::ostringstream os;
    os << "DenseNet: expected input of size " << input_size() << ", got " << got;
    return os.str();
  }

  std::vector<LayerShape> layers_;
  Buffer params_;
};

struct Gradients {
  double loss = 0.0;
  Buffer params;
  Matrix inputs;
};

/// Scalar loss over a batch of outputs; fills d(loss)/d(outputs).
using LossHead = std::function<double(const Matrix& outputs, Matrix& d_outputs)>;

inline void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite value");
  }
}

/// Full gradient of a loss head composed with the net, w.r.t. parameters and inputs.
inline Gradients gradients(const DenseNet& net, const LossHead& head, const Matrix& inputs) {
  Tape tape;
  Matrix out = net.forward_batch(inputs, tape);
  check_finite({out.data(), static_cast<std::size_t>(out.size())}, "forward");
  Matrix d_out = Matrix::Zero(out.rows(), out.cols());
  Gradients g;
  g.loss = head(out, d_out);
  g.params.assign(net.num_params(), 0.0);
  g.inputs = net.backward(tape, d_out, g.params);
  check_finite(g.params, "gradients");
  check_finite({g.inputs.data(), static_cast<std::size_t>(g.inputs.size())}, "input gradients");
  return g;
}

/// Adam with bias correction.
struct AdamState {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  Buffer m;
  Buffer v;

  AdamState() = default;
  AdamState(std::size_t n, double lr) : step_size(lr), m(n, 0.0), v(n, 0.0) {}
};

inline void optimizer_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
  require_shape(params.size() == grads.size(), "optimizer_step: params/grads size mismatch");
  if (s.m.empty() && s.v.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  require_shape(s.m.size() == params.size(), "optimizer_step: state size mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  using Arr = Eigen::ArrayXd;
  const auto n = static_cast<Eigen::Index>(params.size());
  Eigen::Map<Arr> p(params.data(), n), m(s.m.data(), n), v(s.v.data(), n);
  const Eigen::Map<const Arr> g(grads.data(), n);
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.square();
  p -= s.step_size * (m / c1) / ((v / c2).sqrt() + s.epsilon);
}

/// target <- tau * online + (1 - tau) * target
inline void soft_update(std::span<const double> online, std::span<double> target, double tau) {
  require_shape(online.size() == target.size(), "soft_update: shape mismatch");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("soft_update: tau must lie in (0, 1]");
  for (std::size_t i = 0; i < online.size(); ++i) target[i] = tau * online[i] + (1.0 - tau) * target[i];
}

inline void soft_update(const DenseNet& online, DenseNet& target, double tau) {
  soft_update(online.params(), target.params(), tau);
}

/// Online net plus the slowly tracking copy used for bootstrapped targets.
struct TargetPair {
  DenseNet online;
  DenseNet target;
  double tau = 0.001;

  TargetPair() = default;
  TargetPair(DenseNet net, double blend) : online(std::move(net)), target(online), tau(blend) {}

  void soft_update() { adrl::soft_update(online, target, tau); }
};

/// Order-sensitive fingerprint of a parameter buffer (FNV-1a over the bytes).
inline std::uint64_t parameter_hash(std::span<const double> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(params.data());
  for (std::size_t i = 0; i < params.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace adrl
