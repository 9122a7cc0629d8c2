// SPDX-License-Identifier: Apache-2.0

// CAD data model: designs are sets of curves over shared control points,
// edited by a five-command action language.

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mrcad {

/// Tolerance for point identity and action target resolution.
inline constexpr double kIdentityEps = 1e-6;
/// Tolerance below which a curve is degenerate.
inline constexpr double kGeomEps = 1e-9;
/// Canvas half-width: coordinates live in [-20, 20]^2.
inline constexpr double kCanvasBound = 20.0;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// Translation vector for move_curve.
struct Delta {
  double dx = 0.0;
  double dy = 0.0;

  friend bool operator==(const Delta&, const Delta&) = default;
};

inline Point operator+(Point p, Delta d) { return {p.x + d.dx, p.y + d.dy}; }
double distance(Point a, Point b);
bool is_finite(Point p);
bool in_canvas(Point p);

enum class CurveKind { line, circle, arc };

std::string_view to_string(CurveKind kind);
std::optional<CurveKind> curve_kind_from_string(std::string_view name);
/// Number of control points a curve of this kind carries.
std::size_t control_point_count(CurveKind kind);

/// Line: two endpoints. Circle: two points on a diameter. Arc: start, mid, end.
struct Curve {
  CurveKind kind = CurveKind::line;
  std::vector<Point> control_points;

  static Curve line(Point a, Point b) { return {CurveKind::line, {a, b}}; }
  static Curve circle(Point a, Point b) { return {CurveKind::circle, {a, b}}; }
  static Curve arc(Point start, Point mid, Point end) { return {CurveKind::arc, {start, mid, end}}; }

  friend bool operator==(const Curve&, const Curve&) = default;
};

/// Throws DegenerateCurve if the curve violates its kind's geometric invariant
/// (wrong arity, non-finite points, coincident points, collinear arc).
void validate_curve(const Curve& curve);

/// Geometric identity: same kind and control points within eps, allowing the
/// reversals that describe the same point set (line ends, circle diameter ends,
/// arc start/end with the same mid point).
bool same_curve(const Curve& a, const Curve& b, double eps);

/// Total order used for canonical output (kind, then control points).
bool curve_less(const Curve& a, const Curve& b);

/// One entry of the point index: a canonical control point and the curves
/// (by position in Design::curves()) that reference it.
struct PointRef {
  Point point;
  std::vector<std::size_t> curves;

  friend bool operator==(const PointRef&, const PointRef&) = default;
};

/// Rebuilds the point index from scratch; sorted by point.
std::vector<PointRef> build_point_index(std::span<const Curve> curves);

/// An unordered set of curves over shared control points. Immutable value:
/// every edit produces a new Design.
class Design {
 public:
  Design() = default;

  /// Validates every curve, checks the canvas bound, merges control points
  /// within kIdentityEps into shared points and rejects duplicate curves.
  static Design from_curves(std::vector<Curve> curves);

  std::span<const Curve> curves() const { return curves_; }
  std::size_t size() const { return curves_.size(); }
  bool empty() const { return curves_.empty(); }
  const std::vector<PointRef>& point_index() const { return index_; }

 private:
  explicit Design(std::vector<Curve> curves);

  std::vector<Curve> curves_;
  std::vector<PointRef> index_;
};

/// Nearest existing control point within kIdentityEps of p (ties broken by
/// lexicographic order); nullopt if none.
std::optional<Point> canonicalize_point(const Design& design, Point p);

struct MakeCurve {
  Curve curve;
  friend bool operator==(const MakeCurve&, const MakeCurve&) = default;
};
struct RemoveCurve {
  Curve curve;
  friend bool operator==(const RemoveCurve&, const RemoveCurve&) = default;
};
struct MoveCurve {
  Curve curve;
  Delta delta;
  friend bool operator==(const MoveCurve&, const MoveCurve&) = default;
};
struct MovePoint {
  Point from;
  Point to;
  friend bool operator==(const MovePoint&, const MovePoint&) = default;
};
struct DeletePoint {
  Point point;
  friend bool operator==(const DeletePoint&, const DeletePoint&) = default;
};

using Action = std::variant<MakeCurve, RemoveCurve, MoveCurve, MovePoint, DeletePoint>;

std::string_view action_name(const Action& action);

enum class ApplyMode { strict, lenient };

/// Non-fatal notes produced while applying (duplicate make_curve, curves
/// merged by an edit).
using Warnings = std::vector<std::string>;

/// Applies one action. Throws Error with UnresolvedReference, DegenerateResult
/// or OutOfBounds; the input design is never modified.
Design apply_action(const Design& design, const Action& action, Warnings* warnings = nullptr);

struct ApplyResult {
  Design design;
  std::vector<std::size_t> skipped;
  Warnings warnings;
};

/// Left fold of apply. Strict mode rethrows the first error; lenient mode
/// skips failing actions and reports their indices.
ApplyResult apply_all(const Design& design, std::span<const Action> actions, ApplyMode mode);

/// True iff a bijection matches curves by same_curve within eps.
bool design_equal(const Design& a, const Design& b, double eps);

}  // namespace mrcad
