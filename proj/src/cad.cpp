// SPDX-License-Identifier: Apache-2.0

#include "mrcad/cad.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "mrcad/error.hpp"
#include "mrcad/format.hpp"

namespace mrcad {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

bool in_canvas(Point p) { return std::abs(p.x) <= kCanvasBound && std::abs(p.y) <= kCanvasBound; }

std::string_view to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::line:
      return "line";
    case CurveKind::circle:
      return "circle";
    case CurveKind::arc:
      return "arc";
  }
  return "?";
}

std::optional<CurveKind> curve_kind_from_string(std::string_view name) {
  if (name == "line") return CurveKind::line;
  if (name == "circle") return CurveKind::circle;
  if (name == "arc") return CurveKind::arc;
  return std::nullopt;
}

std::size_t control_point_count(CurveKind kind) { return kind == CurveKind::arc ? 3 : 2; }

namespace {

std::string describe(const Curve& c) {
  std::ostringstream os;
  os << to_string(c.kind) << "(";
  for (std::size_t i = 0; i < c.control_points.size(); ++i) {
    if (i) os << ", ";
    os << "(" << format_number(c.control_points[i].x) << ", " << format_number(c.control_points[i].y) << ")";
  }
  os << ")";
  return os.str();
}

std::string describe(Point p) { return "(" + format_number(p.x) + ", " + format_number(p.y) + ")"; }

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Nearest canonical point within kIdentityEps; ties go to the lexicographically
// smaller point.
std::optional<std::size_t> nearest_within(std::span<const Point> canon, Point p) {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < canon.size(); ++i) {
    const double d = distance(canon[i], p);
    if (d > kIdentityEps) continue;
    if (!best || d < best_d || (d == best_d && canon[i] < canon[*best])) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

Point snap(std::vector<Point>& canon, Point p) {
  if (auto i = nearest_within(canon, p)) return canon[*i];
  canon.push_back(p);
  return p;
}

bool points_close(Point a, Point b, double eps) { return distance(a, b) <= eps; }

std::optional<std::size_t> find_curve(std::span<const Curve> curves, const Curve& target) {
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (same_curve(curves[i], target, kIdentityEps)) return i;
  }
  return std::nullopt;
}

// Re-canonicalizes after an edit: untouched points keep their identity, edited
// points merge into any existing point within kIdentityEps.
Design finish_edit(std::vector<Curve> curves, std::span<const Point> anchors, Warnings* warnings) {
  for (const auto& c : curves) {
    for (const auto& p : c.control_points) {
      if (!is_finite(p)) throw Error(ErrorCode::DegenerateResult, "non-finite point in " + describe(c));
      if (!in_canvas(p)) throw Error(ErrorCode::OutOfBounds, describe(p) + " leaves the canvas");
    }
  }
  std::vector<Point> canon(anchors.begin(), anchors.end());
  for (auto& c : curves) {
    for (auto& p : c.control_points) p = snap(canon, p);
  }
  std::vector<Curve> kept;
  kept.reserve(curves.size());
  for (auto& c : curves) {
    try {
      validate_curve(c);
    } catch (const Error& e) {
      throw Error(ErrorCode::DegenerateResult, e.what());
    }
    if (find_curve(kept, c)) {
      if (warnings) warnings->push_back("edit merged duplicate curve " + describe(c));
      continue;
    }
    kept.push_back(std::move(c));
  }
  return Design::from_curves(std::move(kept));
}

}  // namespace

void validate_curve(const Curve& curve) {
  const auto& pts = curve.control_points;
  if (pts.size() != control_point_count(curve.kind)) {
    throw Error(ErrorCode::DegenerateCurve, std::string(to_string(curve.kind)) + " needs " +
                                                std::to_string(control_point_count(curve.kind)) +
                                                " control points, got " + std::to_string(pts.size()));
  }
  for (const auto& p : pts) {
    if (!is_finite(p)) throw Error(ErrorCode::DegenerateCurve, "non-finite control point");
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (distance(pts[i], pts[j]) <= kGeomEps) {
        throw Error(ErrorCode::DegenerateCurve, "coincident control points in " + describe(curve));
      }
    }
  }
  if (curve.kind == CurveKind::arc) {
    const double area = 0.5 * std::abs(cross(pts[0], pts[1], pts[2]));
    if (area <= kGeomEps * kGeomEps) {
      throw Error(ErrorCode::DegenerateCurve, "collinear arc " + describe(curve));
    }
  }
}

bool same_curve(const Curve& a, const Curve& b, double eps) {
  if (a.kind != b.kind || a.control_points.size() != b.control_points.size()) return false;
  const auto& p = a.control_points;
  const auto& q = b.control_points;
  const auto forward = [&] {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!points_close(p[i], q[i], eps)) return false;
    }
    return true;
  };
  if (forward()) return true;
  // Reversal: ends swap, the arc mid stays put.
  const std::size_t n = p.size();
  if (n < 2) return false;
  if (!points_close(p.front(), q.back(), eps) || !points_close(p.back(), q.front(), eps)) return false;
  return n == 2 || points_close(p[1], q[1], eps);
}

bool curve_less(const Curve& a, const Curve& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  return std::lexicographical_compare(a.control_points.begin(), a.control_points.end(), b.control_points.begin(),
                                      b.control_points.end());
}

std::vector<PointRef> build_point_index(std::span<const Curve> curves) {
  std::vector<PointRef> index;
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    for (const auto& p : curves[ci].control_points) {
      auto it = std::find_if(index.begin(), index.end(), [&](const PointRef& r) { return r.point == p; });
      if (it == index.end()) {
        index.push_back({p, {ci}});
      } else if (it->curves.back() != ci) {
        it->curves.push_back(ci);
      }
    }
  }
  std::sort(index.begin(), index.end(), [](const PointRef& a, const PointRef& b) { return a.point < b.point; });
  return index;
}

Design::Design(std::vector<Curve> curves) : curves_(std::move(curves)), index_(build_point_index(curves_)) {}

Design Design::from_curves(std::vector<Curve> curves) {
  std::vector<Point> canon;
  for (auto& c : curves) {
    validate_curve(c);
    for (auto& p : c.control_points) {
      if (!in_canvas(p)) throw Error(ErrorCode::OutOfBounds, describe(p) + " leaves the canvas");
      p = snap(canon, p);
    }
  }
  for (std::size_t i = 0; i < curves.size(); ++i) {
    try {
      validate_curve(curves[i]);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidDesign, std::string("curve ") + std::to_string(i) + " collapses: " + e.what());
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (same_curve(curves[i], curves[j], kIdentityEps)) {
        throw Error(ErrorCode::InvalidDesign, "duplicate curve " + describe(curves[i]));
      }
    }
  }
  return Design(std::move(curves));
}

std::optional<Point> canonicalize_point(const Design& design, Point p) {
  std::vector<Point> pts;
  pts.reserve(design.point_index().size());
  for (const auto& r : design.point_index()) pts.push_back(r.point);
  if (auto i = nearest_within(pts, p)) return pts[*i];
  return std::nullopt;
}

std::string_view action_name(const Action& action) {
  struct Visitor {
    std::string_view operator()(const MakeCurve&) const { return "make_curve"; }
    std::string_view operator()(const RemoveCurve&) const { return "remove_curve"; }
    std::string_view operator()(const MoveCurve&) const { return "move_curve"; }
    std::string_view operator()(const MovePoint&) const { return "move_point"; }
    std::string_view operator()(const DeletePoint&) const { return "delete_point"; }
  };
  return std::visit(Visitor{}, action);
}

namespace {

std::vector<Point> all_points(const Design& d) {
  std::vector<Point> pts;
  for (const auto& r : d.point_index()) pts.push_back(r.point);
  return pts;
}

// Moves every occurrence of the given canonical points; untouched points anchor
// the re-canonicalization.
Design relocate(const Design& d, std::span<const Point> from, std::span<const Point> to, Warnings* warnings) {
  std::vector<Curve> curves(d.curves().begin(), d.curves().end());
  for (auto& c : curves) {
    for (auto& p : c.control_points) {
      for (std::size_t i = 0; i < from.size(); ++i) {
        if (p == from[i]) {
          p = to[i];
          break;
        }
      }
    }
  }
  std::vector<Point> anchors;
  for (const auto& p : all_points(d)) {
    if (std::find(from.begin(), from.end(), p) == from.end()) anchors.push_back(p);
  }
  return finish_edit(std::move(curves), anchors, warnings);
}

Point resolve_point(const Design& d, Point p) {
  auto canon = canonicalize_point(d, p);
  if (!canon) throw Error(ErrorCode::UnresolvedReference, "no control point at " + describe(p));
  return *canon;
}

std::size_t resolve_curve(const Design& d, const Curve& c) {
  auto i = find_curve(d.curves(), c);
  if (!i) throw Error(ErrorCode::UnresolvedReference, "no curve " + describe(c));
  return *i;
}

}  // namespace

Design apply_action(const Design& design, const Action& action, Warnings* warnings) {
  return std::visit(
      [&](const auto& a) -> Design {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, MakeCurve>) {
          try {
            validate_curve(a.curve);
          } catch (const Error& e) {
            throw Error(ErrorCode::DegenerateResult, e.what());
          }
          for (const auto& p : a.curve.control_points) {
            if (!in_canvas(p)) throw Error(ErrorCode::OutOfBounds, describe(p) + " leaves the canvas");
          }
          if (find_curve(design.curves(), a.curve)) {
            if (warnings) warnings->push_back("make_curve ignored duplicate " + describe(a.curve));
            return design;
          }
          std::vector<Curve> curves(design.curves().begin(), design.curves().end());
          curves.push_back(a.curve);
          return finish_edit(std::move(curves), all_points(design), warnings);
        } else if constexpr (std::is_same_v<T, RemoveCurve>) {
          const std::size_t idx = resolve_curve(design, a.curve);
          std::vector<Curve> curves;
          for (std::size_t i = 0; i < design.size(); ++i) {
            if (i != idx) curves.push_back(design.curves()[i]);
          }
          return Design::from_curves(std::move(curves));
        } else if constexpr (std::is_same_v<T, MoveCurve>) {
          if (!std::isfinite(a.delta.dx) || !std::isfinite(a.delta.dy)) {
            throw Error(ErrorCode::DegenerateResult, "non-finite move_curve delta");
          }
          const Curve& target = design.curves()[resolve_curve(design, a.curve)];
          std::vector<Point> from;
          for (const auto& p : target.control_points) {
            if (std::find(from.begin(), from.end(), p) == from.end()) from.push_back(p);
          }
          std::vector<Point> to;
          for (const auto& p : from) to.push_back(p + a.delta);
          return relocate(design, from, to, warnings);
        } else if constexpr (std::is_same_v<T, MovePoint>) {
          if (!is_finite(a.to)) throw Error(ErrorCode::DegenerateResult, "non-finite move_point target");
          const Point from = resolve_point(design, a.from);
          return relocate(design, std::span<const Point>(&from, 1), std::span<const Point>(&a.to, 1), warnings);
        } else {
          const Point p = resolve_point(design, a.point);
          std::vector<Curve> curves;
          for (const auto& c : design.curves()) {
            if (std::find(c.control_points.begin(), c.control_points.end(), p) == c.control_points.end()) {
              curves.push_back(c);
            }
          }
          return Design::from_curves(std::move(curves));
        }
      },
      action);
}

ApplyResult apply_all(const Design& design, std::span<const Action> actions, ApplyMode mode) {
  ApplyResult result{design, {}, {}};
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (mode == ApplyMode::strict) {
      result.design = apply_action(result.design, actions[i], &result.warnings);
      continue;
    }
    try {
      result.design = apply_action(result.design, actions[i], &result.warnings);
    } catch (const Error& e) {
      result.skipped.push_back(i);
      result.warnings.push_back("action " + std::to_string(i) + " skipped: " + e.what());
    }
  }
  return result;
}

bool design_equal(const Design& a, const Design& b, double eps) {
  if (a.size() != b.size()) return false;
  const std::size_t n = a.size();
  // Bipartite matching (Kuhn); designs are small.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (same_curve(a.curves()[i], b.curves()[j], eps)) adj[i].push_back(j);
    }
    if (adj[i].empty()) return false;
  }
  std::vector<std::ptrdiff_t> match_b(n, -1);
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (match_b[j] < 0 || augment(static_cast<std::size_t>(match_b[j]))) {
        match_b[j] = static_cast<std::ptrdiff_t>(i);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    seen.assign(n, 0);
    if (!augment(i)) return false;
  }
  return true;
}

}  // namespace mrcad
