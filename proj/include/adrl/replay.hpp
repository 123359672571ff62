#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "adrl/errors.hpp"
#include "adrl/linalg.hpp"
#include "adrl/rng.hpp"

namespace adrl {

/// One environment step. Raw per-view observations are kept (not encoded
/// states) so that encoders can be re-run with current parameters at update time.
struct Transition {
  std::vector<Vector> views;
  Vector action;
  double reward = 0.0;
  std::vector<Vector> next_views;
  bool terminal = false;
};

using Batch = std::vector<const Transition*>;

/// Fixed-capacity FIFO ring; sampling is uniform with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void store(Transition t) {
    require_shape(!t.views.empty() && t.views.size() == t.next_views.size(),
                  "transition: views and next_views must be nonempty and aligned");
    if (!items_.empty())
      require_shape(t.views.size() == items_.front().views.size(),
                    "transition: view count differs from stored transitions");
    for (Eigen::Index i = 0; i < t.action.size(); ++i) {
      if (!(t.action[i] >= -1.0 && t.action[i] <= 1.0))
        throw std::invalid_argument("transition: action component outside [-1, 1]");
    }
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// Oldest first.
  const Transition& at(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }

  Batch sample(std::size_t n, Rng& rng) const {
    if (n == 0 || items_.size() < n)
      throw UnderfullError("replay buffer holds " + std::to_string(items_.size()) +
                           " transitions, asked for " + std::to_string(n));
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    Batch out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest entry once full
  std::vector<Transition> items_;
};

inline void store(ReplayBuffer& buffer, Transition t) { buffer.store(std::move(t)); }
inline Batch sample(const ReplayBuffer& buffer, std::size_t n, Rng& rng) { return buffer.sample(n, rng); }

}  // namespace adrl
