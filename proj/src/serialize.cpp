// SPDX-License-Identifier: Apache-2.0

#include "mrcad/serialize.hpp"

#include "mrcad/error.hpp"

namespace mrcad {

namespace {

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::SchemaError, (where.empty() ? std::string("/") : where) + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) schema(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema(where, std::string("missing key \"") + key + "\"");
  return *it;
}

void only_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) schema(where + "/" + k, "unknown key");
  }
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) schema(where, "expected a number");
  return j.get<double>();
}

std::string string_of(const Json& j, const std::string& where) {
  if (!j.is_string()) schema(where, "expected a string");
  return j.get<std::string>();
}

const Json& array_of(const Json& j, const std::string& where) {
  if (!j.is_array()) schema(where, "expected an array");
  return j;
}

Json points_json(const std::vector<Point>& pts) {
  Json arr = Json::array();
  for (const auto& p : pts) arr.push_back(to_json(p));
  return arr;
}

std::vector<Point> points_from_json(const Json& j, const std::string& where) {
  std::vector<Point> out;
  std::size_t i = 0;
  for (const auto& p : array_of(j, where)) {
    out.push_back(point_from_json(p, where + "/" + std::to_string(i++)));
  }
  return out;
}

Json curve_fields(const Curve& c) {
  Json j = Json::object();
  j["type"] = std::string(to_string(c.kind));
  j["control_points"] = points_json(c.control_points);
  return j;
}

// Parses "type" + "control_points" inside an object that may carry more keys.
Curve curve_fields_from_json(const Json& j, const std::string& where) {
  const std::string type = string_of(field(j, "type", where), where + "/type");
  const auto kind = curve_kind_from_string(type);
  if (!kind) schema(where + "/type", "unknown curve type \"" + type + "\"");
  Curve c{*kind, points_from_json(field(j, "control_points", where), where + "/control_points")};
  if (c.control_points.size() != control_point_count(*kind)) {
    schema(where + "/control_points", type + " needs " + std::to_string(control_point_count(*kind)) + " points");
  }
  return c;
}

}  // namespace

Json to_json(Point p) { return Json::array({p.x, p.y}); }

Json to_json(const Curve& c) { return curve_fields(c); }

Json to_json(const Design& d) {
  Json curves = Json::array();
  for (const auto& c : d.curves()) curves.push_back(to_json(c));
  Json j = Json::object();
  j["curves"] = std::move(curves);
  return j;
}

Json to_json(const Action& a) {
  Json args = Json::object();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MakeCurve> || std::is_same_v<T, RemoveCurve>) {
          args = curve_fields(v.curve);
        } else if constexpr (std::is_same_v<T, MoveCurve>) {
          args = curve_fields(v.curve);
          args["delta"] = Json::array({v.delta.dx, v.delta.dy});
        } else if constexpr (std::is_same_v<T, MovePoint>) {
          args["point"] = to_json(v.from);
          args["new_point"] = to_json(v.to);
        } else {
          args["point"] = to_json(v.point);
        }
      },
      a);
  Json j = Json::object();
  j["name"] = std::string(action_name(a));
  j["arguments"] = std::move(args);
  return j;
}

Json to_json(const Message& m) {
  Json strokes = Json::array();
  for (const auto& s : m.drawing.strokes) strokes.push_back(points_json(s.points));
  Json j = Json::object();
  j["text"] = m.text;
  j["strokes"] = std::move(strokes);
  return j;
}

Json to_json(const Round& r) {
  Json actions = Json::array();
  for (const auto& a : r.actions) actions.push_back(to_json(a));
  Json j = Json::object();
  j["design_before"] = to_json(r.design_before);
  j["message"] = to_json(r.message);
  j["actions"] = std::move(actions);
  j["design_after"] = to_json(r.design_after);
  j["duration"] = r.duration ? Json(*r.duration) : Json(nullptr);
  return j;
}

Json to_json(const Rollout& r) {
  Json rounds = Json::array();
  for (const auto& round : r.rounds) rounds.push_back(to_json(round));
  Json j = Json::object();
  j["target"] = to_json(r.target);
  j["rounds"] = std::move(rounds);
  j["outcome"] = std::string(to_string(r.outcome));
  j["meta"] = r.meta.is_null() ? Json::object() : r.meta;
  return j;
}

Point point_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) schema(where, "expected [x, y]");
  return {number(j[0], where + "/0"), number(j[1], where + "/1")};
}

Curve curve_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected a curve object");
  only_keys(j, {"type", "control_points"}, where);
  return curve_fields_from_json(j, where);
}

Design design_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected a design object");
  only_keys(j, {"curves"}, where);
  std::vector<Curve> curves;
  std::size_t i = 0;
  for (const auto& c : array_of(field(j, "curves", where), where + "/curves")) {
    curves.push_back(curve_from_json(c, where + "/curves/" + std::to_string(i++)));
  }
  return Design::from_curves(std::move(curves));
}

Action action_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected an action object");
  only_keys(j, {"name", "arguments"}, where);
  const std::string name = string_of(field(j, "name", where), where + "/name");
  const std::string aw = where + "/arguments";
  const Json& args = field(j, "arguments", where);
  if (!args.is_object()) schema(aw, "expected an object");
  if (name == "make_curve" || name == "remove_curve") {
    only_keys(args, {"type", "control_points"}, aw);
    Curve c = curve_fields_from_json(args, aw);
    if (name == "make_curve") return MakeCurve{std::move(c)};
    return RemoveCurve{std::move(c)};
  }
  if (name == "move_curve") {
    only_keys(args, {"type", "control_points", "delta"}, aw);
    Curve c = curve_fields_from_json(args, aw);
    const Point d = point_from_json(field(args, "delta", aw), aw + "/delta");
    return MoveCurve{std::move(c), {d.x, d.y}};
  }
  if (name == "move_point") {
    only_keys(args, {"point", "new_point"}, aw);
    return MovePoint{point_from_json(field(args, "point", aw), aw + "/point"),
                     point_from_json(field(args, "new_point", aw), aw + "/new_point")};
  }
  if (name == "delete_point") {
    only_keys(args, {"point"}, aw);
    return DeletePoint{point_from_json(field(args, "point", aw), aw + "/point")};
  }
  schema(where + "/name", "unknown action \"" + name + "\"");
}

Message message_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected a message object");
  only_keys(j, {"text", "strokes"}, where);
  Message m;
  if (j.contains("text")) m.text = string_of(j["text"], where + "/text");
  if (j.contains("strokes")) {
    std::size_t i = 0;
    for (const auto& s : array_of(j["strokes"], where + "/strokes")) {
      const std::string sw = where + "/strokes/" + std::to_string(i++);
      Stroke stroke{points_from_json(s, sw)};
      if (stroke.points.size() < 2) schema(sw, "a stroke needs at least two points");
      m.drawing.strokes.push_back(std::move(stroke));
    }
  }
  return m;
}

Round round_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected a round object");
  only_keys(j, {"design_before", "message", "actions", "design_after", "duration"}, where);
  Round r;
  r.design_before = design_from_json(field(j, "design_before", where), where + "/design_before");
  r.message = message_from_json(field(j, "message", where), where + "/message");
  std::size_t i = 0;
  for (const auto& a : array_of(field(j, "actions", where), where + "/actions")) {
    r.actions.push_back(action_from_json(a, where + "/actions/" + std::to_string(i++)));
  }
  r.design_after = design_from_json(field(j, "design_after", where), where + "/design_after");
  if (j.contains("duration") && !j["duration"].is_null()) r.duration = number(j["duration"], where + "/duration");
  return r;
}

Rollout rollout_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected a rollout object");
  only_keys(j, {"target", "rounds", "outcome", "meta"}, where);
  Rollout r;
  r.target = design_from_json(field(j, "target", where), where + "/target");
  std::size_t i = 0;
  for (const auto& round : array_of(field(j, "rounds", where), where + "/rounds")) {
    r.rounds.push_back(round_from_json(round, where + "/rounds/" + std::to_string(i++)));
  }
  const std::string outcome = string_of(field(j, "outcome", where), where + "/outcome");
  const auto o = outcome_from_string(outcome);
  if (!o) schema(where + "/outcome", "unknown outcome \"" + outcome + "\"");
  r.outcome = *o;
  if (j.contains("meta")) {
    if (!j["meta"].is_object()) schema(where + "/meta", "expected an object");
    r.meta = j["meta"];
  }
  return r;
}

std::string dump(const Json& j) { return j.dump(); }

Json parse_json(std::string_view text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    schema(where, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace mrcad
