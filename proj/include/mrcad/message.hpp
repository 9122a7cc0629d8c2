// SPDX-License-Identifier: Apache-2.0

// The Designer's instruction: optional text plus an optional drawing made of
// freehand strokes.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mrcad/cad.hpp"
#include "mrcad/viewport.hpp"

namespace mrcad {

struct Stroke {
  std::vector<Point> points;
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct Drawing {
  std::vector<Stroke> strokes;
  bool empty() const { return strokes.empty(); }
  friend bool operator==(const Drawing&, const Drawing&) = default;
};

/// Throws InvalidDesign for strokes with fewer than two points or non-finite points.
void validate_drawing(const Drawing& drawing);

struct Message {
  std::string text;
  Drawing drawing;

  /// Whitespace-only text counts as no text.
  bool has_text() const;
  bool has_drawing() const { return !drawing.empty(); }
  bool empty() const { return !has_text() && !has_drawing(); }
  friend bool operator==(const Message&, const Message&) = default;
};

enum class Modality { text_only, drawing_only, multimodal, empty };
std::string_view to_string(Modality m);
Modality message_modality(const Message& m);

enum class AblationMode { none, drop_text, drop_drawing };
std::string_view to_string(AblationMode m);
/// Accepts "none", "text"/"drop_text", "drawing"/"drop_drawing"; throws InvalidConfig.
AblationMode ablation_from_string(std::string_view name);
Message ablate(Message m, AblationMode mode);

/// Number of Unicode code points in UTF-8 text (continuation bytes skipped).
std::size_t utf8_length(std::string_view text);

struct StrokeStats {
  std::size_t stroke_count = 0;
  /// Total polyline length of all strokes, canvas units.
  double ink = 0.0;
};
StrokeStats stroke_stats(const Drawing& d);

struct StrokeStyle {
  std::string color = "#FF0000";
  double width = 3.0;
};

/// One <path> per stroke ("M x y L x y ..."), wrapped in a <g>; coordinates in
/// viewBox space.
std::string drawing_to_svg(const Drawing& d, const Viewport& vp = {}, const StrokeStyle& style = {});

/// Inverse of drawing_to_svg. Accepts either markup containing <path d="...">
/// elements or bare path data (each M starts a new stroke). Only absolute M/L
/// commands are supported. Throws ParseError (with byte offset) or
/// UnsupportedCommand.
Drawing svg_to_drawing(std::string_view svg, const Viewport& vp = {});

}  // namespace mrcad
