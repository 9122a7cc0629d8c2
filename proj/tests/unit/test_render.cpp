// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <regex>

#include "mrcad/game.hpp"
#include "mrcad/render.hpp"
#include "support/generators.hpp"

using namespace mrcad;

namespace {

struct SvgArc {
  Point from, to;
  double r;
  int large, sweep;
};

std::vector<SvgArc> arcs_in(const std::string& svg) {
  static const std::regex re(R"(M ([-\d.e]+) ([-\d.e]+) A ([-\d.e]+) [-\d.e]+ 0 ([01]) ([01]) ([-\d.e]+) ([-\d.e]+))");
  std::vector<SvgArc> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.push_back({{std::stod(m[1]), std::stod(m[2])},
                   {std::stod(m[6]), std::stod(m[7])},
                   std::stod(m[3]),
                   std::stoi(m[4]),
                   std::stoi(m[5])});
  }
  return out;
}

double vec_angle(double ux, double uy, double vx, double vy) {
  const double a = std::atan2(ux * vy - uy * vx, ux * vx + uy * vy);
  return a;
}

// Pixel distance from q to the arc an SVG renderer draws, via the endpoint to
// center parameterization conversion of the SVG implementation notes.
double svg_arc_distance(const SvgArc& a, Point q) {
  const double x1p = (a.from.x - a.to.x) / 2, y1p = (a.from.y - a.to.y) / 2;
  double r = a.r;
  const double lambda = (x1p * x1p + y1p * y1p) / (r * r);
  if (lambda > 1) r *= std::sqrt(lambda);
  const double num = r * r * r * r - r * r * y1p * y1p - r * r * x1p * x1p;
  const double den = r * r * y1p * y1p + r * r * x1p * x1p;
  double coef = std::sqrt(std::max(0.0, num / den));
  if (a.large == a.sweep) coef = -coef;
  const double cxp = coef * y1p, cyp = -coef * x1p;
  const double cx = cxp + (a.from.x + a.to.x) / 2, cy = cyp + (a.from.y + a.to.y) / 2;
  const double ux = (x1p - cxp) / r, uy = (y1p - cyp) / r;
  const double vx = (-x1p - cxp) / r, vy = (-y1p - cyp) / r;
  const double theta1 = vec_angle(1, 0, ux, uy);
  double dtheta = vec_angle(ux, uy, vx, vy);
  if (!a.sweep && dtheta > 0) dtheta -= 2 * std::numbers::pi;
  if (a.sweep && dtheta < 0) dtheta += 2 * std::numbers::pi;
  double best = 1e300;
  for (int i = 0; i <= 20000; ++i) {
    const double t = theta1 + dtheta * i / 20000.0;
    best = std::min(best, std::hypot(cx + r * std::cos(t) - q.x, cy + r * std::sin(t) - q.y));
  }
  return best;
}

}  // namespace

TEST_CASE("scene_to_svg: empty design has an empty content group") {
  const std::string svg = scene_to_svg({});
  CHECK(svg.find("<g class=\"design\"") != std::string::npos);
  CHECK(svg.find("<line") == std::string::npos);
  CHECK(svg.find("<circle") == std::string::npos);
  CHECK(svg.find("viewBox=\"0 0 512 512\"") != std::string::npos);
}

TEST_CASE("scene_to_svg: circle pixel geometry") {
  const Scene s{Design::from_curves({Curve::circle({0, -18}, {0, 18})}), {}, {}};
  const std::string svg = scene_to_svg(s);
  CHECK(svg.find("<circle cx=\"256\" cy=\"256\" r=\"230.4\"/>") != std::string::npos);
  CHECK(svg == scene_to_svg(s));
}

TEST_CASE("scene_to_svg: y axis flips at the boundary") {
  const Scene s{Design::from_curves({Curve::line({-20, 20}, {20, -20})}), {}, {}};
  CHECK(scene_to_svg(s).find("<line x1=\"0\" y1=\"0\" x2=\"512\" y2=\"512\"/>") != std::string::npos);
}

TEST_CASE("scene_to_svg: curves are emitted in canonical order") {
  const Curve a = Curve::line({0, 0}, {5, 0}), b = Curve::circle({1, 1}, {3, 1});
  const Scene s1{Design::from_curves({b, a}), {}, {}};
  const Scene s2{Design::from_curves({a, b}), {}, {}};
  CHECK(scene_to_svg(s1) == scene_to_svg(s2));
}

TEST_CASE("arc rendering passes through all three control points") {
  testing::Rng rng(404);
  const Viewport vp;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Curve c = testing::random_curve(rng, false);
    if (c.kind != CurveKind::arc) continue;
    const std::string svg = scene_to_svg({Design::from_curves({c}), {}, {}});
    const auto arcs = arcs_in(svg);
    REQUIRE(arcs.size() == 1);
    for (const auto& p : c.control_points) CHECK(svg_arc_distance(arcs[0], vp.to_view(p)) <= 1.5);
    ++checked;
  }
  CHECK(checked > 30);
}

TEST_CASE("rasterize") {
  const Bitmap blank = rasterize({}, 64, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) REQUIRE(blank.at(x, y) == Rgb{});
  }

  // Horizontal line y = 0 maps to view row 256; a pixel row is inked iff its
  // center lies within half the stroke width of that row.
  const Scene line{Design::from_curves({Curve::line({-20, 0}, {20, 0})}), {}, {}};
  const Bitmap bmp = rasterize(line);
  const double row = Viewport{}.to_view({0, 0}).y;
  for (int y = 0; y < 512; ++y) {
    const bool inked = std::abs(y + 0.5 - row) <= 1.5;
    CHECK((bmp.at(100, y) == Rgb{0, 0, 0}) == inked);
  }
  CHECK(bmp == rasterize(line));

  const Scene overlay{line.design, Drawing{{Stroke{{{0, -20}, {0, 20}}}}}, {}};
  const Bitmap over = rasterize(overlay);
  CHECK(over.at(256, 256) == Rgb{255, 0, 0});
}

TEST_CASE("encode_png produces a PNG stream") {
  const auto png = encode_png(rasterize({}, 8, 8));
  REQUIRE(png.size() > 8);
  CHECK(png[1] == 'P');
  CHECK(png[2] == 'N');
  CHECK(png[3] == 'G');
}

TEST_CASE("render_history") {
  CHECK(render_history({}).empty());
  const Design before = Design::from_curves({Curve::line({0, 0}, {5, 0})});
  const Design after = Design::from_curves({Curve::line({0, 0}, {5, 5})});
  const Drawing d{{Stroke{{{5, 0}, {5, 5}}}}};
  const std::vector<Round> rounds{{before, Message{"up", d}, {MovePoint{{5, 0}, {5, 5}}}, after, std::nullopt}};
  const auto panels = render_history(rounds);
  REQUIRE(panels.size() == 1);
  CHECK(panels[0].round == 1);
  CHECK(panels[0].text == "up");
  CHECK(design_equal(panels[0].before.design, before, 0.0));
  CHECK(panels[0].before.overlay == d);
  CHECK(design_equal(panels[0].after.design, after, 0.0));
  CHECK(panels[0].after.overlay.empty());
}
