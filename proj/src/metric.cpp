// SPDX-License-Identifier: Apache-2.0

#include "mrcad/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mrcad/error.hpp"

namespace mrcad {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Maps an angle into [0, 2*pi).
double wrap(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double angle_of(Point center, Point p) { return std::atan2(p.y - center.y, p.x - center.x); }

Point on_circle(Point center, double radius, double angle) {
  return {center.x + radius * std::cos(angle), center.y + radius * std::sin(angle)};
}

double dist_point_segment(Point p, Point a, Point b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, {a.x + t * vx, a.y + t * vy});
}

void require_kind(const Curve& c, CurveKind kind) {
  if (c.kind != kind) {
    throw Error(ErrorCode::DegenerateCurve,
                "expected " + std::string(to_string(kind)) + ", got " + std::string(to_string(c.kind)));
  }
}

}  // namespace

void MetricConfig::validate() const {
  if (samples_per_curve < 2) throw Error(ErrorCode::InvalidConfig, "samples_per_curve must be >= 2");
  if (!(canvas_extent > 0) || !std::isfinite(canvas_extent)) {
    throw Error(ErrorCode::InvalidConfig, "canvas_extent must be positive");
  }
  if (!(cap > 0 && cap <= 1)) throw Error(ErrorCode::InvalidConfig, "cap must lie in (0, 1]");
}

CircleParams circle_params(const Curve& circle) {
  require_kind(circle, CurveKind::circle);
  validate_curve(circle);
  const Point a = circle.control_points[0];
  const Point b = circle.control_points[1];
  return {{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, 0.5 * distance(a, b)};
}

ArcParams arc_params(const Curve& arc) {
  require_kind(arc, CurveKind::arc);
  validate_curve(arc);
  const Point s = arc.control_points[0];
  const Point m = arc.control_points[1];
  const Point e = arc.control_points[2];

  // Circumcenter, computed relative to s for conditioning.
  const double bx = m.x - s.x, by = m.y - s.y;
  const double cx = e.x - s.x, cy = e.y - s.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const Point center{s.x + (cy * b2 - by * c2) / d, s.y + (bx * c2 - cx * b2) / d};

  ArcParams out;
  out.center = center;
  out.radius = distance(center, s);
  out.start_angle = angle_of(center, s);
  out.end_angle = angle_of(center, e);
  const double ccw_span = wrap(out.end_angle - out.start_angle);
  const double mid_offset = wrap(angle_of(center, m) - out.start_angle);
  if (mid_offset < ccw_span) {
    out.orientation = Orientation::counterclockwise;
    out.sweep = ccw_span;
  } else {
    out.orientation = Orientation::clockwise;
    out.sweep = kTwoPi - ccw_span;
  }
  return out;
}

std::vector<Point> sample_curve(const Curve& curve, int n) {
  if (n < 2) throw Error(ErrorCode::InvalidConfig, "sample count must be >= 2");
  validate_curve(curve);
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(n));
  const auto& cp = curve.control_points;
  switch (curve.kind) {
    case CurveKind::line: {
      for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        out.push_back({cp[0].x + t * (cp[1].x - cp[0].x), cp[0].y + t * (cp[1].y - cp[0].y)});
      }
      out.back() = cp[1];
      break;
    }
    case CurveKind::circle: {
      const auto [center, radius] = circle_params(curve);
      const double a0 = angle_of(center, cp[0]);
      out.push_back(cp[0]);
      // Clockwise from the first diameter point.
      for (int i = 1; i < n; ++i) out.push_back(on_circle(center, radius, a0 - kTwoPi * i / n));
      break;
    }
    case CurveKind::arc: {
      const ArcParams a = arc_params(curve);
      const double dir = a.orientation == Orientation::counterclockwise ? 1.0 : -1.0;
      out.push_back(cp[0]);
      for (int i = 1; i < n - 1; ++i) {
        out.push_back(on_circle(a.center, a.radius, a.start_angle + dir * a.sweep * i / (n - 1)));
      }
      out.push_back(cp[2]);
      break;
    }
  }
  return out;
}

double dist_point_curve(Point p, const Curve& curve) {
  const auto& cp = curve.control_points;
  switch (curve.kind) {
    case CurveKind::line:
      validate_curve(curve);
      return dist_point_segment(p, cp[0], cp[1]);
    case CurveKind::circle: {
      const auto [center, radius] = circle_params(curve);
      return std::abs(distance(p, center) - radius);
    }
    case CurveKind::arc: {
      const ArcParams a = arc_params(curve);
      const double r = distance(p, a.center);
      if (r == 0.0) return a.radius;  // every arc point is equidistant
      const double theta = angle_of(a.center, p);
      const double offset = a.orientation == Orientation::counterclockwise ? wrap(theta - a.start_angle)
                                                                          : wrap(a.start_angle - theta);
      if (offset <= a.sweep) return std::abs(r - a.radius);
      return std::min(distance(p, cp[0]), distance(p, cp[2]));
    }
  }
  return 0.0;
}

double dist_point_design(Point p, std::span<const Curve> design, const MetricConfig& cfg) {
  double best = cfg.cap;
  for (const auto& c : design) {
    best = std::min(best, dist_point_curve(p, c) / cfg.canvas_extent);
  }
  return best;
}

double asym_chamfer(std::span<const Curve> from, std::span<const Curve> to, const MetricConfig& cfg) {
  cfg.validate();
  if (from.empty()) return 0.0;
  std::vector<double> dists;
  dists.reserve(from.size() * static_cast<std::size_t>(cfg.samples_per_curve));
  for (const auto& c : from) {
    // Samples of a curve lie on that curve: distance to an identical curve is zero.
    const bool present = std::any_of(to.begin(), to.end(), [&](const Curve& e) { return same_curve(c, e, 0.0); });
    for (const auto& p : sample_curve(c, cfg.samples_per_curve)) {
      dists.push_back(present ? 0.0 : dist_point_design(p, to, cfg));
    }
  }
  // Sorted summation makes the result independent of curve order.
  std::sort(dists.begin(), dists.end());
  double total = 0.0;
  for (double d : dists) total += d;
  if (cfg.aggregation == Aggregation::sum) return total;
  return total / static_cast<double>(dists.size());
}

double chamfer(std::span<const Curve> a, std::span<const Curve> b, const MetricConfig& cfg) {
  return 0.5 * (asym_chamfer(a, b, cfg) + asym_chamfer(b, a, cfg));
}

bool is_success(const Design& design, const Design& target, double threshold, const MetricConfig& cfg) {
  if (!(threshold > 0)) throw Error(ErrorCode::InvalidConfig, "success threshold must be positive");
  return chamfer(design, target, cfg) < threshold;
}

}  // namespace mrcad
