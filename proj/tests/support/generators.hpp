// SPDX-License-Identifier: Apache-2.0

// Seeded generators for property tests.

#pragma once

#include <random>
#include <vector>

#include "mrcad/cad.hpp"
#include "mrcad/error.hpp"

namespace mrcad::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Points on a half-unit grid inside [-bound, bound]^2.
inline Point grid_point(Rng& rng, double bound = 18.0) {
  const int n = static_cast<int>(bound * 2);
  return {uniform_int(rng, -n, n) * 0.5, uniform_int(rng, -n, n) * 0.5};
}

inline Point free_point(Rng& rng, double bound = 20.0) { return {uniform(rng, -bound, bound), uniform(rng, -bound, bound)}; }

inline Curve random_curve(Rng& rng, bool on_grid = true, double bound = 18.0) {
  for (;;) {
    const auto pick = [&] { return on_grid ? grid_point(rng, bound) : free_point(rng, bound); };
    const int kind = uniform_int(rng, 0, 2);
    Curve c = kind == 0   ? Curve::line(pick(), pick())
              : kind == 1 ? Curve::circle(pick(), pick())
                          : Curve::arc(pick(), pick(), pick());
    bool ok = true;
    for (const auto& p : c.control_points) ok = ok && in_canvas(p);
    if (!ok) continue;
    try {
      validate_curve(c);
      return c;
    } catch (const Error&) {
    }
  }
}

inline Design random_design(Rng& rng, int min_curves = 1, int max_curves = 6, bool on_grid = true) {
  const int n = uniform_int(rng, min_curves, max_curves);
  std::vector<Curve> curves;
  while (static_cast<int>(curves.size()) < n) {
    Curve c = random_curve(rng, on_grid);
    bool dup = false;
    for (const auto& o : curves) dup = dup || same_curve(o, c, kIdentityEps);
    if (!dup) curves.push_back(std::move(c));
  }
  return Design::from_curves(std::move(curves));
}

/// Mostly well-targeted actions, with some misses that should fail or be skipped.
inline Action random_action(Rng& rng, const Design& d) {
  const auto existing_point = [&]() -> Point {
    const auto& idx = d.point_index();
    if (idx.empty() || uniform_int(rng, 0, 9) == 0) return grid_point(rng);
    return idx[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(idx.size()) - 1))].point;
  };
  const auto existing_curve = [&]() -> Curve {
    if (d.empty() || uniform_int(rng, 0, 9) == 0) return random_curve(rng);
    return d.curves()[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(d.size()) - 1))];
  };
  switch (uniform_int(rng, 0, 5)) {
    case 0:
    case 1:
      return MakeCurve{random_curve(rng)};
    case 2:
      return RemoveCurve{existing_curve()};
    case 3:
      return MoveCurve{existing_curve(), {uniform_int(rng, -4, 4) * 0.5, uniform_int(rng, -4, 4) * 0.5}};
    case 4:
      return MovePoint{existing_point(), grid_point(rng)};
    default:
      return DeletePoint{existing_point()};
  }
}

/// A sequence generated against the evolving design (so most actions resolve).
inline std::vector<Action> random_actions(Rng& rng, Design d, int n) {
  std::vector<Action> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(random_action(rng, d));
    try {
      d = apply_action(d, out.back());
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace mrcad::testing
