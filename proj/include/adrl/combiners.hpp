#pragma once

// Fixed combination rules over per-worker actions or features, used by the
// multi-view ablation baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "adrl/errors.hpp"
#include "adrl/linalg.hpp"

namespace adrl {

using ActionSet = std::vector<Vector>;

inline void validate_action_set(const ActionSet& s) {
  if (s.empty()) throw ShapeError("action set is empty");
  for (const auto& a : s) require_shape(a.size() == s.front().size(), "action set: mixed dimensions");
}

/// ACT-AVG: componentwise mean.
inline Vector combine_avg(const ActionSet& s) {
  validate_action_set(s);
  Vector sum = Vector::Zero(s.front().size());
  for (const auto& a : s) sum += a;
  return sum / static_cast<double>(s.size());
}

/// Member minimising the summed squared distance to all others; lowest index on ties.
inline std::size_t medoid_index(const ActionSet& s) {
  validate_action_set(s);
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < s.size(); ++w) {
    double cost = 0.0;
    for (const auto& v : s) cost += (s[w] - v).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = w;
    }
  }
  return best;
}

/// ACT-CNT
inline Vector combine_cnt(const ActionSet& s) { return s[medoid_index(s)]; }

/// Bin of v among `bins` equal bins over [-1, 1]; the last bin is closed at 1.
inline int action_bin(double v, int bins) {
  if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument("action value outside [-1, 1]");
  auto edge = [bins](int b) { return -1.0 + 2.0 * b / bins; };
  int b = static_cast<int>(std::floor((v + 1.0) * bins / 2.0));
  b = std::min(std::max(b, 0), bins - 1);
  // floor can land one bin off next to an edge
  if (b > 0 && v < edge(b)) --b;
  else if (b + 1 < bins && v >= edge(b + 1)) ++b;
  return b;
}

/// ACT-MJV: per dimension, the most populated of `bins` equal bins (lowest on
/// ties) wins and the output is the mean of the values that fell into it.
inline Vector combine_mjv(const ActionSet& s, int bins = 10) {
  validate_action_set(s);
  if (bins < 1) throw ConfigError("combine_mjv: need at least one bin");
  const auto dim = s.front().size();
  Vector out(dim);
  std::vector<int> count(static_cast<std::size_t>(bins));
  std::vector<double> sum(static_cast<std::size_t>(bins));
  for (Eigen::Index i = 0; i < dim; ++i) {
    std::fill(count.begin(), count.end(), 0);
    std::fill(sum.begin(), sum.end(), 0.0);
    for (const auto& a : s) {
      const auto b = static_cast<std::size_t>(action_bin(a[i], bins));
      ++count[b];
      sum[b] += a[i];
    }
    std::size_t win = 0;
    for (std::size_t b = 1; b < count.size(); ++b) {
      if (count[b] > count[win]) win = b;
    }
    out[i] = sum[win] / count[win];
  }
  return out;
}

/// FT-COMB: ordered concatenation. `offsets`, when given, receives the start of each block.
inline Vector concat_features(const std::vector<Vector>& features, std::vector<Eigen::Index>* offsets = nullptr) {
  if (features.empty()) throw ShapeError("concat_features: no features");
  Eigen::Index total = 0;
  for (const auto& f : features) total += f.size();
  Vector out(total);
  Eigen::Index at = 0;
  if (offsets) offsets->clear();
  for (const auto& f : features) {
    if (offsets) offsets->push_back(at);
    out.segment(at, f.size()) = f;
    at += f.size();
  }
  return out;
}

enum class Combiner { average, centroid, majority };

inline Vector combine(Combiner c, const ActionSet& s) {
  switch (c) {
    case Combiner::average: return combine_avg(s);
    case Combiner::centroid: return combine_cnt(s);
    case Combiner::majority: return combine_mjv(s);
  }
  throw std::logic_error("unknown combiner");
}

}  // namespace adrl
