// SPDX-License-Identifier: Apache-2.0

#include "mrcad/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mrcad/error.hpp"
#include "mrcad/format.hpp"
#include "mrcad/game.hpp"
#include "mrcad/metric.hpp"

namespace mrcad {

namespace {

std::string num(double v) { return format_number(v); }

Rgb parse_color(const std::string& hex) {
  if (hex.size() != 7 || hex[0] != '#') throw Error(ErrorCode::InvalidConfig, "color must be #RRGGBB: " + hex);
  const auto channel = [&](std::size_t at) {
    return static_cast<std::uint8_t>(std::stoi(hex.substr(at, 2), nullptr, 16));
  };
  return {channel(1), channel(3), channel(5)};
}

void check_style(const RenderStyle& s) {
  if (!(s.design_width > 0) || !(s.overlay_width > 0)) {
    throw Error(ErrorCode::InvalidConfig, "stroke widths must be positive");
  }
}

// Distance evaluator with the arc/circle parameters solved once.
class CurveDistance {
 public:
  explicit CurveDistance(const Curve& c) : curve_(c) {
    if (c.kind == CurveKind::arc) arc_ = arc_params(c);
    if (c.kind == CurveKind::circle) circle_ = circle_params(c);
  }

  double operator()(Point p) const {
    const auto& cp = curve_.control_points;
    switch (curve_.kind) {
      case CurveKind::line:
        return segment(p, cp[0], cp[1]);
      case CurveKind::circle:
        return std::abs(distance(p, circle_.center) - circle_.radius);
      case CurveKind::arc: {
        const double r = distance(p, arc_.center);
        if (r == 0.0) return arc_.radius;
        double off = std::atan2(p.y - arc_.center.y, p.x - arc_.center.x) - arc_.start_angle;
        if (arc_.orientation == Orientation::clockwise) off = -off;
        off = std::fmod(off, 2 * std::numbers::pi);
        if (off < 0) off += 2 * std::numbers::pi;
        if (off <= arc_.sweep) return std::abs(r - arc_.radius);
        return std::min(distance(p, cp[0]), distance(p, cp[2]));
      }
    }
    return 0.0;
  }

  /// Canvas-space bounding box of the geometry.
  void bounds(Point& lo, Point& hi) const {
    if (curve_.kind == CurveKind::line) {
      const auto& cp = curve_.control_points;
      lo = {std::min(cp[0].x, cp[1].x), std::min(cp[0].y, cp[1].y)};
      hi = {std::max(cp[0].x, cp[1].x), std::max(cp[0].y, cp[1].y)};
      return;
    }
    const Point c = curve_.kind == CurveKind::arc ? arc_.center : circle_.center;
    const double r = curve_.kind == CurveKind::arc ? arc_.radius : circle_.radius;
    lo = {c.x - r, c.y - r};
    hi = {c.x + r, c.y + r};
  }

  static double segment(Point p, Point a, Point b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, {a.x + t * vx, a.y + t * vy});
  }

 private:
  const Curve& curve_;
  ArcParams arc_{};
  CircleParams circle_{};
};

class Canvas {
 public:
  Canvas(int w, int h, Rgb bg) : bmp_{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)} {
    for (std::size_t i = 0; i < bmp_.pixels.size(); i += 3) {
      bmp_.pixels[i] = bg.r;
      bmp_.pixels[i + 1] = bg.g;
      bmp_.pixels[i + 2] = bg.b;
    }
    sx_ = w / (2 * kCanvasBound);
    sy_ = h / (2 * kCanvasBound);
  }

  // Paints every pixel whose center is within half_width pixels of the shape.
  template <class Dist>
  void paint(Point lo, Point hi, double half_width, Dist&& dist, Rgb color) {
    const double scale = 0.5 * (sx_ + sy_);
    const int x0 = std::max(0, static_cast<int>(std::floor((lo.x + kCanvasBound) * sx_ - half_width - 1)));
    const int x1 = std::min(bmp_.width - 1, static_cast<int>(std::ceil((hi.x + kCanvasBound) * sx_ + half_width + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor((kCanvasBound - hi.y) * sy_ - half_width - 1)));
    const int y1 = std::min(bmp_.height - 1, static_cast<int>(std::ceil((kCanvasBound - lo.y) * sy_ + half_width + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point canvas{(x + 0.5) / sx_ - kCanvasBound, kCanvasBound - (y + 0.5) / sy_};
        if (dist(canvas) * scale <= half_width) set(x, y, color);
      }
    }
  }

  Bitmap take() { return std::move(bmp_); }

 private:
  void set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * bmp_.width + x) * 3;
    bmp_.pixels[i] = c.r;
    bmp_.pixels[i + 1] = c.g;
    bmp_.pixels[i + 2] = c.b;
  }

  Bitmap bmp_;
  double sx_ = 1.0, sy_ = 1.0;
};

std::vector<Curve> sorted_curves(const Design& d) {
  std::vector<Curve> curves(d.curves().begin(), d.curves().end());
  std::sort(curves.begin(), curves.end(), curve_less);
  return curves;
}

}  // namespace

std::string scene_to_svg(const Scene& scene, const Viewport& vp) {
  check_style(scene.style);
  const auto& st = scene.style;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(vp.size) << "\" height=\"" << num(vp.size)
     << "\" viewBox=\"0 0 " << num(vp.size) << ' ' << num(vp.size) << "\">";
  os << "<rect width=\"" << num(vp.size) << "\" height=\"" << num(vp.size) << "\" fill=\"" << st.background << "\"/>";
  os << "<g class=\"design\" fill=\"none\" stroke=\"" << st.design_color << "\" stroke-width=\""
     << num(st.design_width) << "\" stroke-linecap=\"round\">";
  for (const auto& c : sorted_curves(scene.design)) {
    const auto& cp = c.control_points;
    switch (c.kind) {
      case CurveKind::line: {
        const Point a = vp.to_view(cp[0]);
        const Point b = vp.to_view(cp[1]);
        os << "<line x1=\"" << num(a.x) << "\" y1=\"" << num(a.y) << "\" x2=\"" << num(b.x) << "\" y2=\"" << num(b.y)
           << "\"/>";
        break;
      }
      case CurveKind::circle: {
        const auto [center, radius] = circle_params(c);
        const Point v = vp.to_view(center);
        os << "<circle cx=\"" << num(v.x) << "\" cy=\"" << num(v.y) << "\" r=\"" << num(radius * vp.scale())
           << "\"/>";
        break;
      }
      case CurveKind::arc: {
        const ArcParams a = arc_params(c);
        const Point s = vp.to_view(cp[0]);
        const Point e = vp.to_view(cp[2]);
        const double r = a.radius * vp.scale();
        // The y flip mirrors orientation: clockwise on the canvas is the
        // positive-angle (sweep=1) direction in SVG user space.
        const int large = a.sweep > std::numbers::pi ? 1 : 0;
        const int sweep = a.orientation == Orientation::clockwise ? 1 : 0;
        os << "<path d=\"M " << num(s.x) << ' ' << num(s.y) << " A " << num(r) << ' ' << num(r) << " 0 " << large
           << ' ' << sweep << ' ' << num(e.x) << ' ' << num(e.y) << "\"/>";
        break;
      }
    }
  }
  os << "</g>";
  os << drawing_to_svg(scene.overlay, vp, {st.overlay_color, st.overlay_width});
  os << "</svg>";
  return os.str();
}

Rgb Bitmap::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

Bitmap rasterize(const Scene& scene, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidConfig, "bitmap size must be at least 1x1");
  check_style(scene.style);
  Canvas canvas(width, height, parse_color(scene.style.background));
  const Rgb ink = parse_color(scene.style.design_color);
  for (const auto& c : sorted_curves(scene.design)) {
    const CurveDistance dist(c);
    Point lo, hi;
    dist.bounds(lo, hi);
    canvas.paint(lo, hi, scene.style.design_width / 2, dist, ink);
  }
  const Rgb red = parse_color(scene.style.overlay_color);
  for (const auto& stroke : scene.overlay.strokes) {
    for (std::size_t i = 1; i < stroke.points.size(); ++i) {
      const Point a = stroke.points[i - 1];
      const Point b = stroke.points[i];
      canvas.paint({std::min(a.x, b.x), std::min(a.y, b.y)}, {std::max(a.x, b.x), std::max(a.y, b.y)},
                   scene.style.overlay_width / 2, [&](Point p) { return CurveDistance::segment(p, a, b); }, red);
    }
  }
  return canvas.take();
}

std::vector<std::uint8_t> encode_png(const Bitmap& bitmap) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(bitmap.width);
  image.height = static_cast<png_uint_32>(bitmap.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  const png_int_32 stride = bitmap.width * 3;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, bitmap.pixels.data(), stride, nullptr)) {
    throw Error(ErrorCode::InvalidConfig, std::string("png sizing failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, bitmap.pixels.data(), stride, nullptr)) {
    throw Error(ErrorCode::InvalidConfig, std::string("png encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const Bitmap& bitmap, const std::filesystem::path& path) {
  const auto bytes = encode_png(bitmap);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<HistoryPanel> render_history(std::span<const Round> rounds, const RenderStyle& style) {
  std::vector<HistoryPanel> panels;
  panels.reserve(rounds.size());
  int i = 1;
  for (const auto& r : rounds) {
    panels.push_back({i++, r.message.text, Scene{r.design_before, r.message.drawing, style},
                      Scene{r.design_after, {}, style}});
  }
  return panels;
}

}  // namespace mrcad
