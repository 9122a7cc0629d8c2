// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mrcad/cad.hpp"

namespace mrcad {

/// Maps canvas coordinates ([-20, 20]^2, y up) onto a square SVG viewBox
/// ([0, size]^2, y down). The flip happens here and nowhere else.
struct Viewport {
  double size = 512.0;
  double extent = 2.0 * kCanvasBound;

  double scale() const { return size / extent; }
  Point to_view(Point p) const { return {(p.x + extent / 2) * scale(), (extent / 2 - p.y) * scale()}; }
  Point to_canvas(Point v) const { return {v.x / scale() - extent / 2, extent / 2 - v.y / scale()}; }
};

}  // namespace mrcad
