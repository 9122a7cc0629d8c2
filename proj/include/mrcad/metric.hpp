// SPDX-License-Identifier: Apache-2.0

// Closed-form point-to-curve distances and the normalized symmetric chamfer
// distance between designs.

#pragma once

#include <span>
#include <vector>

#include "mrcad/cad.hpp"

namespace mrcad {

enum class Aggregation { mean, sum };

struct MetricConfig {
  int samples_per_curve = 10;
  /// Side length of the canvas; raw distances are divided by it.
  double canvas_extent = 2.0 * kCanvasBound;
  /// Per-point normalized distance ceiling, also the value against an empty design.
  double cap = 0.25;
  Aggregation aggregation = Aggregation::mean;

  /// Throws InvalidConfig.
  void validate() const;
};

struct CircleParams {
  Point center;
  double radius = 0.0;
};

enum class Orientation { counterclockwise, clockwise };

/// Circumcircle of an arc plus the oriented angular span from start to end that
/// passes through mid. Angles are radians in canvas coordinates (y up).
struct ArcParams {
  Point center;
  double radius = 0.0;
  double start_angle = 0.0;
  double end_angle = 0.0;
  /// Angular length of the span, in (0, 2*pi).
  double sweep = 0.0;
  Orientation orientation = Orientation::counterclockwise;
};

CircleParams circle_params(const Curve& circle);
ArcParams arc_params(const Curve& arc);

/// n >= 2 points: lines and arcs include both ends; circles start at the first
/// diameter point and go once around without repeating it.
std::vector<Point> sample_curve(const Curve& curve, int n);

/// Exact Euclidean distance (raw canvas units) from p to the curve's point set.
double dist_point_curve(Point p, const Curve& curve);

/// min over curves of the raw distance / canvas_extent, capped; cap when empty.
double dist_point_design(Point p, std::span<const Curve> design, const MetricConfig& cfg = {});

/// Aggregate of dist_point_design over the samples of every curve of `from`.
/// Zero when `from` is empty. Independent of curve order, bit for bit.
double asym_chamfer(std::span<const Curve> from, std::span<const Curve> to, const MetricConfig& cfg = {});

/// 0.5 * (asym(a, b) + asym(b, a)).
double chamfer(std::span<const Curve> a, std::span<const Curve> b, const MetricConfig& cfg = {});

inline double chamfer(const Design& a, const Design& b, const MetricConfig& cfg = {}) {
  return chamfer(a.curves(), b.curves(), cfg);
}
inline double asym_chamfer(const Design& from, const Design& to, const MetricConfig& cfg = {}) {
  return asym_chamfer(from.curves(), to.curves(), cfg);
}

/// chamfer(design, target) < threshold.
bool is_success(const Design& design, const Design& target, double threshold, const MetricConfig& cfg = {});

}  // namespace mrcad
