#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "adrl/errors.hpp"

namespace adrl {

using Point = Eigen::Vector2d;

struct TrackProjection {
  Point closest;
  double offset = 0.0;   // signed lateral distance, positive to the left of travel
  double tangent = 0.0;  // heading of the centerline at the closest point
  std::size_t segment = 0;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

/// Polyline centerline with constant half-width.
class Track {
 public:
  Track(std::vector<Point> points, bool closed, double half_width)
      : points_(std::move(points)), closed_(closed), half_width_(half_width) {
    if (points_.size() < 2) throw ConfigError("track: need at least two centerline points");
    if (!(half_width_ > 0.0) || !std::isfinite(half_width_)) throw ConfigError("track: half-width must be positive");
    for (const auto& p : points_)
      if (!p.allFinite()) throw ConfigError("track: non-finite centerline point");
    if (closed_ && (points_.front() - points_.back()).norm() < 1e-12) points_.pop_back();
    if (closed_ && points_.size() < 3) throw ConfigError("track: closed track needs three distinct points");
    for (std::size_t i = 0; i < segment_count(); ++i) {
      if (segment_vector(i).norm() < 1e-9) throw ConfigError("track: zero-length segment");
      length_ += segment_vector(i).norm();
    }
    for (const auto& p : points_) extent_ = std::max(extent_, p.cwiseAbs().maxCoeff());
    extent_ = std::max(extent_, 1.0);
  }

  /// Straight centerline along +x from the origin.
  static Track straight(double length, double half_width) {
    return Track({Point(0.0, 0.0), Point(length, 0.0)}, false, half_width);
  }

  /// Counter-clockwise stadium: two straights joined by half circles, each
  /// straight carrying one chicane (a smooth sideways bump).
  static Track loop(double straight, double radius, double chicane_amplitude, double chicane_length,
                    double spacing, double half_width) {
    if (!(straight > 0.0) || !(radius > 0.0) || !(spacing > 0.0))
      throw ConfigError("track: loop dimensions must be positive");
    if (chicane_length > straight) throw ConfigError("track: chicane longer than the straight");
    const double pi = std::numbers::pi;
    const double perimeter = 2.0 * straight + 2.0 * pi * radius;
    const auto n = static_cast<std::size_t>(std::ceil(perimeter / spacing));
    std::vector<Point> pts;
    pts.reserve(n);
    auto bump = [&](double along) {
      const double u = (along - 0.5 * (straight - chicane_length)) / chicane_length;
      if (chicane_length <= 0.0 || u <= 0.0 || u >= 1.0) return 0.0;
      return chicane_amplitude * 0.5 * (1.0 - std::cos(2.0 * pi * u));
    };
    for (std::size_t i = 0; i < n; ++i) {
      double s = perimeter * static_cast<double>(i) / static_cast<double>(n);
      const double half = 0.5 * straight;
      if (s < straight) {  // bottom straight, heading +x; bump pushes outward (-y)
        pts.emplace_back(-half + s, -radius - bump(s));
        continue;
      }
      s -= straight;
      if (s < pi * radius) {
        const double a = -0.5 * pi + s / radius;
        pts.emplace_back(half + radius * std::cos(a), radius * std::sin(a));
        continue;
      }
      s -= pi * radius;
      if (s < straight) {  // top straight, heading -x
        pts.emplace_back(half - s, radius + bump(s));
        continue;
      }
      s -= straight;
      const double a = 0.5 * pi + s / radius;
      pts.emplace_back(-half + radius * std::cos(a), radius * std::sin(a));
    }
    return Track(std::move(pts), true, half_width);
  }

  bool closed() const { return closed_; }
  double half_width() const { return half_width_; }
  double length() const { return length_; }
  double extent() const { return extent_; }
  const std::vector<Point>& points() const { return points_; }

  Point start() const { return points_.front(); }
  double start_heading() const {
    const Point d = segment_vector(0);
    return std::atan2(d.y(), d.x());
  }

  TrackProjection project(const Point& p) const {
    TrackProjection best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < segment_count(); ++i) {
      const Point a = points_[i];
      const Point d = segment_vector(i);
      double t = (p - a).dot(d) / d.squaredNorm();
      // open tracks extend their end segments so the car never falls off the map
      const bool first = i == 0, last = i + 1 == segment_count();
      const double lo = (!closed_ && first) ? -std::numeric_limits<double>::infinity() : 0.0;
      const double hi = (!closed_ && last) ? std::numeric_limits<double>::infinity() : 1.0;
      t = std::clamp(t, lo, hi);
      const Point c = a + t * d;
      const double d2 = (p - c).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best.closest = c;
        best.segment = i;
        best.tangent = std::atan2(d.y(), d.x());
        const Point rel = p - c;
        best.offset = std::copysign(rel.norm(), d.x() * rel.y() - d.y() * rel.x());
      }
    }
    return best;
  }

  /// Tangent heading `ahead` meters downstream of a projection (clamped at the end of open tracks).
  double tangent_ahead(const TrackProjection& from, double ahead) const {
    std::size_t seg = from.segment;
    double remaining = ahead + (from.closest - points_[seg]).norm();
    while (true) {
      const double len = segment_vector(seg).norm();
      if (remaining <= len) break;
      remaining -= len;
      if (seg + 1 < segment_count()) ++seg;
      else if (closed_) seg = 0;
      else break;
    }
    const Point d = segment_vector(seg);
    return std::atan2(d.y(), d.x());
  }

 private:
  std::size_t segment_count() const { return closed_ ? points_.size() : points_.size() - 1; }
  Point segment_vector(std::size_t i) const { return points_[(i + 1) % points_.size()] - points_[i]; }

  std::vector<Point> points_;
  bool closed_;
  double half_width_;
  double length_ = 0.0;
  double extent_ = 0.0;
};

}  // namespace adrl
