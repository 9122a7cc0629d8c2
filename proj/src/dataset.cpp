// SPDX-License-Identifier: Apache-2.0

#include "mrcad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "mrcad/digest.hpp"
#include "mrcad/error.hpp"
#include "mrcad/format.hpp"
#include "mrcad/serialize.hpp"

namespace mrcad {

namespace {

std::string describe(Point p) { return "(" + format_number(p.x) + ", " + format_number(p.y) + ")"; }

std::string describe(const Curve& c) {
  std::string s(to_string(c.kind));
  s += "(";
  for (std::size_t i = 0; i < c.control_points.size(); ++i) {
    if (i) s += ", ";
    s += describe(c.control_points[i]);
  }
  return s + ")";
}

// Reversal-free form: line and circle points sorted, arc ends sorted.
Curve oriented(Curve c) {
  auto& p = c.control_points;
  if (p.size() >= 2 && p.back() < p.front()) std::swap(p.front(), p.back());
  return c;
}

struct Box {
  Point lo{1e300, 1e300};
  Point hi{-1e300, -1e300};
};

Box bounds(const Design& d) {
  Box b;
  for (const auto& c : d.curves()) {
    for (const auto& p : c.control_points) {
      b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y)};
      b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y)};
    }
  }
  return b;
}

Design normalize_once(const Design& design) {
  if (design.empty()) throw Error(ErrorCode::DegenerateBoundingBox, "empty design has no bounding box");
  const Box b = bounds(design);
  const double span = std::max(b.hi.x - b.lo.x, b.hi.y - b.lo.y);
  if (span <= kGeomEps) throw Error(ErrorCode::DegenerateBoundingBox, "bounding box collapses to a point");
  const double s = 2 * kGridHalf / span;
  const Point c{(b.lo.x + b.hi.x) / 2, (b.lo.y + b.hi.y) / 2};
  std::vector<Curve> kept;
  for (Curve curve : design.curves()) {
    for (auto& p : curve.control_points) {
      p = {std::floor((p.x - c.x) * s + 0.5), std::floor((p.y - c.y) * s + 0.5)};
      // -0 would make equal designs dump differently.
      if (p.x == 0) p.x = 0;
      if (p.y == 0) p.y = 0;
    }
    try {
      validate_curve(curve);
    } catch (const Error&) {
      continue;
    }
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Curve& k) { return same_curve(k, curve, 0.0); });
    if (!dup) kept.push_back(std::move(curve));
  }
  if (kept.empty()) throw Error(ErrorCode::DegenerateBoundingBox, "every curve collapses on the grid");
  return Design::from_curves(std::move(kept));
}

double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

double perpendicular(Point p, Point a, Point u) { return std::abs(cross(u, {p.x - a.x, p.y - a.y})); }

std::optional<std::string> parallel_violation(const Curve& l1, const Curve& l2, double min_gap) {
  const Point a = l1.control_points[0], b = l1.control_points[1];
  const Point c = l2.control_points[0], d = l2.control_points[1];
  const double len1 = distance(a, b), len2 = distance(c, d);
  const Point u{(b.x - a.x) / len1, (b.y - a.y) / len1};
  const Point v{(d.x - c.x) / len2, (d.y - c.y) / len2};
  if (std::abs(cross(u, v)) > std::sin(kDefaultAngleTol)) return std::nullopt;
  const double t0 = (c.x - a.x) * u.x + (c.y - a.y) * u.y;
  const double t1 = (d.x - a.x) * u.x + (d.y - a.y) * u.y;
  const double overlap = std::min(len1, std::max(t0, t1)) - std::max(0.0, std::min(t0, t1));
  if (overlap <= kGeomEps) return std::nullopt;
  const double sep = std::min({perpendicular(c, a, u), perpendicular(d, a, u), perpendicular(a, c, v),
                               perpendicular(b, c, v)});
  if (sep >= min_gap) return std::nullopt;
  return "parallel lines " + describe(l1) + " and " + describe(l2) + " are " + format_number(sep) + " apart";
}

std::optional<std::pair<Point, double>> round_params(const Curve& c) {
  if (c.kind == CurveKind::circle) {
    const auto p = circle_params(c);
    return std::pair{p.center, p.radius};
  }
  if (c.kind == CurveKind::arc) {
    const auto p = arc_params(c);
    return std::pair{p.center, p.radius};
  }
  return std::nullopt;
}

int chunk_begin(int i, int n, int parts) { return i * n / parts; }

std::vector<Point> trace(const Curve& c) { return sample_curve(c, 8); }

}  // namespace

std::string Signature::key() const {
  return "h" + std::to_string(h_lines) + "v" + std::to_string(v_lines) + "s" + std::to_string(skew_lines) + "a" +
         std::to_string(arcs) + "c" + std::to_string(circles);
}

Signature signature(const Design& design, double angle_tol) {
  Signature s;
  const double t = std::tan(angle_tol);
  for (const auto& c : design.curves()) {
    switch (c.kind) {
      case CurveKind::line: {
        const double dx = std::abs(c.control_points[1].x - c.control_points[0].x);
        const double dy = std::abs(c.control_points[1].y - c.control_points[0].y);
        if (dy <= t * dx) {
          ++s.h_lines;
        } else if (dx <= t * dy) {
          ++s.v_lines;
        } else {
          ++s.skew_lines;
        }
        break;
      }
      case CurveKind::arc:
        ++s.arcs;
        break;
      case CurveKind::circle:
        ++s.circles;
        break;
    }
  }
  return s;
}

Design normalize_to_grid(const Design& design) {
  Design cur = normalize_once(design);
  // Dropping a collapsed curve can shrink the box; settle on a fixed point.
  for (int i = 0; i < 8; ++i) {
    Design next = normalize_once(cur);
    if (design_equal(next, cur, 0.0)) return next;
    cur = std::move(next);
  }
  return cur;
}

std::string design_id(const Design& design) {
  Design basis = design;
  try {
    basis = normalize_to_grid(design);
  } catch (const Error&) {
  }
  std::vector<Curve> curves;
  for (const auto& c : basis.curves()) curves.push_back(oriented(c));
  std::sort(curves.begin(), curves.end(), curve_less);
  Json arr = Json::array();
  for (const auto& c : curves) arr.push_back(to_json(c));
  return sha256_hex(dump(arr)).substr(0, 16);
}

RescaleResult rescale_for_play(const Design& design, double scale, double min_gap) {
  if (!(scale > 0) || !std::isfinite(scale)) throw Error(ErrorCode::InvalidConfig, "scale must be positive");
  std::vector<Curve> curves;
  for (Curve c : design.curves()) {
    for (auto& p : c.control_points) {
      p = {p.x * scale, p.y * scale};
      if (!in_canvas(p)) return {std::nullopt, "point " + describe(p) + " leaves the canvas"};
    }
    curves.push_back(std::move(c));
  }
  Design scaled;
  try {
    scaled = Design::from_curves(curves);
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  }
  const auto& idx = scaled.point_index();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const double gap = distance(idx[i].point, idx[j].point);
      if (gap < min_gap) {
        return {std::nullopt, "points " + describe(idx[i].point) + " and " + describe(idx[j].point) + " are " +
                                  format_number(gap) + " apart"};
      }
    }
  }
  const auto cs = scaled.curves();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      if (cs[i].kind == CurveKind::line && cs[j].kind == CurveKind::line) {
        if (auto v = parallel_violation(cs[i], cs[j], min_gap)) return {std::nullopt, *v};
        continue;
      }
      const auto a = round_params(cs[i]), b = round_params(cs[j]);
      if (!a || !b || distance(a->first, b->first) > kIdentityEps) continue;
      const double dr = std::abs(a->second - b->second);
      if (dr > kIdentityEps && dr < min_gap) {
        return {std::nullopt, "concentric " + describe(cs[i]) + " and " + describe(cs[j]) + " differ in radius by " +
                                  format_number(dr)};
      }
    }
  }
  return {std::move(scaled), ""};
}

std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::no_actions:
      return "no_actions";
    case ExclusionReason::empty_message:
      return "empty_message";
    case ExclusionReason::missing_rounds:
      return "missing_rounds";
    case ExclusionReason::above_threshold:
      return "above_threshold";
  }
  return "?";
}

std::optional<ExclusionReason> exclusion_reason(const Rollout& rollout, const ExclusionOptions& opts) {
  const auto& rounds = rollout.rounds;
  if (rounds.empty() || !rounds.front().design_before.empty()) return ExclusionReason::missing_rounds;
  for (std::size_t i = 1; i < rounds.size(); ++i) {
    if (!design_equal(rounds[i].design_before, rounds[i - 1].design_after, kIdentityEps)) {
      return ExclusionReason::missing_rounds;
    }
  }
  if (std::all_of(rounds.begin(), rounds.end(), [](const Round& r) { return r.actions.empty(); })) {
    return ExclusionReason::no_actions;
  }
  if (std::any_of(rounds.begin(), rounds.end(), [](const Round& r) { return r.message.empty(); })) {
    return ExclusionReason::empty_message;
  }
  if (opts.inclusion_threshold && !(final_distance(rollout, opts.metric) < *opts.inclusion_threshold)) {
    return ExclusionReason::above_threshold;
  }
  return std::nullopt;
}

std::vector<RolloutIssue> validate_rollout(const Rollout& rollout, const GameConfig& cfg) {
  std::vector<RolloutIssue> out;
  const auto& rounds = rollout.rounds;
  if (static_cast<int>(rounds.size()) > cfg.max_rounds) {
    out.push_back({0, std::to_string(rounds.size()) + " rounds exceed max_rounds " + std::to_string(cfg.max_rounds)});
  }
  if (!rounds.empty() && !rounds.front().design_before.empty()) {
    out.push_back({1, "design_before is not the empty design"});
  }
  for (std::size_t i = 1; i < rounds.size(); ++i) {
    if (!design_equal(rounds[i].design_before, rounds[i - 1].design_after, kIdentityEps)) {
      out.push_back({static_cast<int>(i) + 1, "design_before differs from the previous design_after"});
    }
  }
  if (rollout.outcome == Outcome::won) {
    const double d = final_distance(rollout, cfg.metric);
    if (!(d < cfg.win_threshold)) {
      out.push_back({0, "outcome is won but the final distance " + format_number(d) + " is not below " +
                            format_number(cfg.win_threshold)});
    }
  }
  return out;
}

std::vector<RolloutIssue> replay_check(const Rollout& rollout) {
  std::vector<RolloutIssue> out;
  const auto& rounds = rollout.rounds;
  if (!rounds.empty() && !rounds.front().design_before.empty()) {
    out.push_back({1, "design_before is not the empty design"});
  }
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const int r = static_cast<int>(i) + 1;
    if (i > 0 && !design_equal(rounds[i].design_before, rounds[i - 1].design_after, kIdentityEps)) {
      out.push_back({r, "design_before differs from the previous design_after"});
    }
    const Design replayed = apply_all(rounds[i].design_before, rounds[i].actions, ApplyMode::lenient).design;
    if (!design_equal(replayed, rounds[i].design_after, kIdentityEps)) {
      out.push_back({r, "design_after does not match the replayed actions"});
    }
  }
  return out;
}

FilterResult exclusion_filter(std::vector<DatasetRecord> records, const ExclusionOptions& opts) {
  FilterResult out;
  for (auto& r : records) {
    if (auto why = exclusion_reason(r.rollout, opts)) {
      out.excluded.push_back({std::move(r), *why});
    } else {
      out.kept.push_back(std::move(r));
    }
  }
  return out;
}

double final_distance(const Rollout& rollout, const MetricConfig& metric) {
  const Design empty;
  const Design& last = rollout.rounds.empty() ? empty : rollout.rounds.back().design_after;
  return chamfer(last, rollout.target, metric);
}

bool is_successful(const Rollout& rollout, const SplitSpec& spec) {
  return !rollout.rounds.empty() && final_distance(rollout, spec.metric) < spec.success_threshold;
}

std::vector<SplitEntry> build_splits(std::span<const DatasetRecord> records, const SplitSpec& spec) {
  std::map<std::string, SplitEntry> by_id;
  for (const auto& r : records) {
    auto& e = by_id[r.design_id];
    e.design_id = r.design_id;
    ++e.rollouts;
    if (is_successful(r.rollout, spec)) ++e.successes;
  }
  std::vector<SplitEntry> out;
  for (auto& [id, e] : by_id) {
    if (e.successes >= spec.very_dense_min) {
      e.split = "very_dense";
    } else if (e.successes >= spec.dense_min) {
      e.split = "dense";
    } else if (e.successes >= spec.coverage_min && e.successes <= spec.coverage_max) {
      e.split = "coverage";
    } else {
      e.split = "none";
    }
    e.eval = e.successes >= spec.eval_min;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<RoundStats> round_stats(std::span<const DatasetRecord> records, const MetricConfig& metric) {
  struct Acc {
    RoundStats s;
    double strokes = 0, ink = 0, text = 0, dist = 0;
    void add(const Round& r, const Design& target, const MetricConfig& metric) {
      ++s.n;
      switch (message_modality(r.message)) {
        case Modality::text_only:
          ++s.text_only;
          break;
        case Modality::drawing_only:
          ++s.drawing_only;
          break;
        case Modality::multimodal:
          ++s.multimodal;
          break;
        case Modality::empty:
          ++s.empty;
          break;
      }
      const auto st = stroke_stats(r.message.drawing);
      strokes += static_cast<double>(st.stroke_count);
      ink += st.ink;
      text += static_cast<double>(utf8_length(r.message.text));
      dist += chamfer(r.design_after, target, metric);
    }
    RoundStats finish() {
      if (s.n) {
        s.mean_strokes = strokes / s.n;
        s.mean_ink = ink / s.n;
        s.mean_text_length = text / s.n;
        s.mean_distance = dist / s.n;
      }
      return s;
    }
  };
  std::map<int, Acc> per_round;
  Acc gen, ref;
  gen.s.group = "generation";
  ref.s.group = "refinement";
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < rec.rollout.rounds.size(); ++i) {
      const int round = static_cast<int>(i) + 1;
      const auto& r = rec.rollout.rounds[i];
      auto& acc = per_round[round];
      acc.s.round = round;
      acc.s.group = round == 1 ? "generation" : "refinement";
      acc.add(r, rec.rollout.target, metric);
      (round == 1 ? gen : ref).add(r, rec.rollout.target, metric);
    }
  }
  std::vector<RoundStats> out;
  for (auto& [round, acc] : per_round) out.push_back(acc.finish());
  out.push_back(gen.finish());
  out.push_back(ref.finish());
  return out;
}

void write_round_stats_csv(std::ostream& out, std::span<const RoundStats> stats) {
  out << "group,round,n,text_only,drawing_only,multimodal,empty,drawing_share,text_share,mean_strokes,mean_ink,"
         "mean_text_length,mean_distance\n";
  for (const auto& s : stats) {
    out << s.group << ',' << (s.round ? std::to_string(s.round) : std::string("all")) << ',' << s.n << ','
        << s.text_only << ',' << s.drawing_only << ',' << s.multimodal << ',' << s.empty << ','
        << format_number(s.drawing_share()) << ',' << format_number(s.text_share()) << ','
        << format_number(s.mean_strokes) << ',' << format_number(s.mean_ink) << ','
        << format_number(s.mean_text_length) << ',' << format_number(s.mean_distance) << '\n';
  }
}

DatasetRecord make_record(Rollout rollout, std::size_t line) {
  DatasetRecord rec;
  rec.design_id = design_id(rollout.target);
  const auto it = rollout.meta.find("rollout_id");
  rec.rollout_id = it != rollout.meta.end() && it->is_string() ? it->get<std::string>() : "line-" + std::to_string(line);
  rec.rollout = std::move(rollout);
  return rec;
}

std::vector<DatasetRecord> read_records(std::istream& in, const std::string& source) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(make_record(rollout_from_json(parse_json(line)), n));
    } catch (const Error& e) {
      throw Error(e.code(), source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<DatasetRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open " + path.string());
  return read_records(in, path.string());
}

void write_records(std::ostream& out, std::span<const DatasetRecord> records) {
  for (const auto& r : records) out << dump(to_json(r.rollout)) << '\n';
}

void write_records(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::SchemaError, "cannot write " + path.string());
  write_records(out, records);
}

std::vector<Design> read_designs(std::istream& in, const std::string& source) {
  std::vector<Design> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = parse_json(line);
      if (j.is_object() && j.contains("design")) {
        out.push_back(design_from_json(j["design"], "/design"));
      } else {
        out.push_back(design_from_json(j));
      }
    } catch (const Error& e) {
      throw Error(e.code(), source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Design synthetic_design(std::mt19937_64& rng, const SyntheticSpec& spec) {
  const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int b = spec.bound;
  const int n = pick(spec.min_curves, spec.max_curves);
  std::vector<Curve> curves;
  std::vector<Point> used;
  while (static_cast<int>(curves.size()) < n) {
    Curve c;
    const int kind = pick(0, 5);
    if (kind <= 2) {
      const auto point = [&]() -> Point {
        if (!used.empty() && pick(0, 2) == 0) return used[static_cast<std::size_t>(pick(0, static_cast<int>(used.size()) - 1))];
        const double x = pick(-b, b);
        return {x, static_cast<double>(pick(-b, b))};
      };
      const Point a = point();
      const Point b = point();
      c = Curve::line(a, b);
    } else {
      // Whole circle inside the bound so arcs and circles never bulge out.
      const int r = pick(1, std::max(1, b / 2));
      const double cx = pick(-b + r, b - r);
      const double cy = pick(-b + r, b - r);
      if (kind == 5) {
        c = Curve::circle({cx - r, cy}, {cx + r, cy});
      } else {
        const int q = pick(0, 3);
        const Point dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const Point s = dirs[q], m = dirs[(q + 1) % 4], e = dirs[(q + 2) % 4];
        c = Curve::arc({cx + r * s.x, cy + r * s.y}, {cx + r * m.x, cy + r * m.y}, {cx + r * e.x, cy + r * e.y});
      }
    }
    try {
      validate_curve(c);
    } catch (const Error&) {
      continue;
    }
    if (std::any_of(curves.begin(), curves.end(), [&](const Curve& o) { return same_curve(o, c, kIdentityEps); })) {
      continue;
    }
    for (const auto& p : c.control_points) used.push_back(p);
    curves.push_back(std::move(c));
  }
  return Design::from_curves(std::move(curves));
}

Rollout synthetic_rollout(const Design& target, int rounds, bool success, const std::string& rollout_id) {
  const int n = static_cast<int>(target.size());
  if (rounds < 1 || (success && rounds > n)) {
    throw Error(ErrorCode::InvalidConfig, "cannot build " + std::to_string(n) + " curves in " +
                                              std::to_string(rounds) + " rounds");
  }
  Rollout r;
  r.target = target;
  r.meta["rollout_id"] = rollout_id;
  r.meta["dyad"] = "synthetic";
  r.meta["condition"] = "dataset";
  Design cur;
  for (int i = 0; i < rounds; ++i) {
    Round round;
    round.design_before = cur;
    std::string text;
    Drawing drawing;
    if (success) {
      for (int k = chunk_begin(i, n, rounds); k < chunk_begin(i + 1, n, rounds); ++k) {
        const Curve& c = target.curves()[static_cast<std::size_t>(k)];
        round.actions.push_back(MakeCurve{c});
        text += (text.empty() ? "add a " : ", a ") + std::string(to_string(c.kind));
        drawing.strokes.push_back({trace(c)});
      }
    } else if (i == 0) {
      round.actions.push_back(MakeCurve{Curve::line({19, 19}, {19.5, 19})});
      text = "put a short line top right";
      drawing.strokes.push_back({{{19, 19}, {19.5, 19}}});
    } else {
      text = "looks off, try again";
    }
    // Round 1 carries both channels; refinements alternate between them.
    if (i > 0 && !drawing.empty()) {
      if (i % 2) {
        text.clear();
      } else {
        drawing.strokes.clear();
      }
    }
    if (text.empty() && drawing.empty()) text = "keep going";
    round.message = {text, drawing};
    round.design_after = apply_all(cur, round.actions, ApplyMode::lenient).design;
    round.duration = 30.0;
    cur = round.design_after;
    r.rounds.push_back(std::move(round));
  }
  r.outcome = success ? Outcome::won : Outcome::lost;
  return r;
}

}  // namespace mrcad
