// SPDX-License-Identifier: Apache-2.0

// Deterministic rendering of designs and drawing overlays to SVG and RGB
// bitmaps.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mrcad/cad.hpp"
#include "mrcad/message.hpp"
#include "mrcad/viewport.hpp"

namespace mrcad {

struct Round;

struct RenderStyle {
  double design_width = 3.0;
  double overlay_width = 3.0;
  std::string design_color = "#000000";
  std::string overlay_color = "#FF0000";
  std::string background = "#FFFFFF";
};

struct Scene {
  Design design;
  Drawing overlay;
  RenderStyle style;
};

/// Canonical SVG document. Curves are emitted in curve_less order, overlay
/// strokes in sequence. Identical scenes give identical bytes.
std::string scene_to_svg(const Scene& scene, const Viewport& vp = {});

struct Rgb {
  std::uint8_t r = 255, g = 255, b = 255;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Bitmap {
  int width = 0;
  int height = 0;
  /// Row-major RGB triples.
  std::vector<std::uint8_t> pixels;

  Rgb at(int x, int y) const;
  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

/// No anti-aliasing: a pixel takes a stroke's color iff its center lies within
/// half the stroke width of the geometry. Overlay strokes paint over curves.
Bitmap rasterize(const Scene& scene, int width = 512, int height = 512);

std::vector<std::uint8_t> encode_png(const Bitmap& bitmap);
void write_png(const Bitmap& bitmap, const std::filesystem::path& path);

/// Before/after panels for one past round: the design the Designer drew on,
/// with the drawing overlaid, and the design that resulted.
struct HistoryPanel {
  int round = 0;
  std::string text;
  Scene before;
  Scene after;
};

std::vector<HistoryPanel> render_history(std::span<const Round> rounds, const RenderStyle& style = {});

}  // namespace mrcad
