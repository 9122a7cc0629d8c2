// SPDX-License-Identifier: Apache-2.0

#include "mrcad/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "mrcad/error.hpp"

namespace mrcad {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, (where.empty() ? std::string("/") : where) + ": " + what);
}

class Reader {
 public:
  Reader(const Json& j, std::string where, std::initializer_list<const char*> keys) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) bad(where_, "expected an object");
    for (const auto& [k, v] : j.items()) {
      bool ok = false;
      for (const char* allowed : keys) ok = ok || k == allowed;
      if (!ok) bad(where_ + "/" + k, "unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string at(const char* key) const { return where_ + "/" + key; }
  const Json& raw(const char* key) const { return j_[key]; }

  void number(const char* key, double& out) const {
    if (!has(key)) return;
    if (!j_[key].is_number()) bad(at(key), "expected a number");
    out = j_[key].get<double>();
  }
  void integer(const char* key, int& out) const {
    if (!has(key)) return;
    if (!j_[key].is_number_integer()) bad(at(key), "expected an integer");
    out = j_[key].get<int>();
  }
  void boolean(const char* key, bool& out) const {
    if (!has(key)) return;
    if (!j_[key].is_boolean()) bad(at(key), "expected true or false");
    out = j_[key].get<bool>();
  }
  void string(const char* key, std::string& out) const {
    if (!has(key)) return;
    if (!j_[key].is_string()) bad(at(key), "expected a string");
    out = j_[key].get<std::string>();
  }
  /// null means "no limit".
  void limit(const char* key, std::optional<double>& out) const {
    if (!has(key)) return;
    if (j_[key].is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    number(key, v);
    out = v;
  }

 private:
  const Json& j_;
  std::string where_;
};

Json limit_json(std::optional<double> v) { return v && std::isfinite(*v) ? Json(*v) : Json(nullptr); }

ChannelRule channel_from_string(const std::string& s, const std::string& where) {
  for (auto r : {ChannelRule::multimodal, ChannelRule::text_only, ChannelRule::drawing_only}) {
    if (to_string(r) == s) return r;
  }
  bad(where, "unknown modality \"" + s + "\"");
}

template <class F>
auto rethrow_as_config(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

}  // namespace

Json to_json(const MetricConfig& m) {
  return {{"samples_per_curve", m.samples_per_curve},
          {"canvas_extent", m.canvas_extent},
          {"cap", m.cap},
          {"aggregation", m.aggregation == Aggregation::mean ? "mean" : "sum"}};
}

MetricConfig metric_config_from_json(const Json& j, const std::string& where) {
  Reader r(j, where, {"samples_per_curve", "canvas_extent", "cap", "aggregation"});
  MetricConfig m;
  r.integer("samples_per_curve", m.samples_per_curve);
  r.number("canvas_extent", m.canvas_extent);
  r.number("cap", m.cap);
  std::string agg = m.aggregation == Aggregation::mean ? "mean" : "sum";
  r.string("aggregation", agg);
  if (agg == "mean") {
    m.aggregation = Aggregation::mean;
  } else if (agg == "sum") {
    m.aggregation = Aggregation::sum;
  } else {
    bad(r.at("aggregation"), "expected \"mean\" or \"sum\"");
  }
  rethrow_as_config([&] {
    m.validate();
    return 0;
  });
  return m;
}

Json to_json(const GameConfig& g) {
  Json j{{"name", g.name},
         {"max_rounds", g.max_rounds},
         {"total_time", limit_json(g.total_time)},
         {"win_threshold", g.win_threshold},
         {"submission_schedule", g.submission_schedule},
         {"lives", g.lives},
         {"modality", to_string(g.modality)},
         {"char_limit", g.char_limit ? Json(*g.char_limit) : Json(nullptr)},
         {"designer_time", limit_json(g.designer_time)},
         {"maker_time", limit_json(g.maker_time)},
         {"designer_time_multiplier", g.designer_time_multiplier},
         {"metric", to_json(g.metric)}};
  return j;
}

GameConfig game_config_from_json(const Json& j, const std::string& where) {
  Reader r(j, where,
           {"preset", "name", "max_rounds", "total_time", "win_threshold", "submission_schedule", "lives", "modality",
            "char_limit", "designer_time", "maker_time", "designer_time_multiplier", "metric"});
  GameConfig g;
  if (r.has("preset")) {
    std::string preset;
    r.string("preset", preset);
    try {
      g = condition_preset(preset);
    } catch (const Error& e) {
      bad(r.at("preset"), e.what());
    }
  }
  r.string("name", g.name);
  r.integer("max_rounds", g.max_rounds);
  if (r.has("total_time")) {
    std::optional<double> t;
    r.limit("total_time", t);
    g.total_time = t ? *t : std::numeric_limits<double>::infinity();
  }
  r.number("win_threshold", g.win_threshold);
  if (r.has("submission_schedule")) {
    const Json& s = r.raw("submission_schedule");
    if (!s.is_array()) bad(r.at("submission_schedule"), "expected an array of numbers");
    g.submission_schedule.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number()) bad(r.at("submission_schedule") + "/" + std::to_string(i), "expected a number");
      g.submission_schedule.push_back(s[i].get<double>());
    }
  }
  r.integer("lives", g.lives);
  if (r.has("modality")) {
    std::string m;
    r.string("modality", m);
    g.modality = channel_from_string(m, r.at("modality"));
  }
  if (r.has("char_limit")) {
    if (r.raw("char_limit").is_null()) {
      g.char_limit.reset();
    } else {
      int c = 0;
      r.integer("char_limit", c);
      g.char_limit = c;
    }
  }
  r.limit("designer_time", g.designer_time);
  r.limit("maker_time", g.maker_time);
  r.number("designer_time_multiplier", g.designer_time_multiplier);
  if (r.has("metric")) g.metric = metric_config_from_json(r.raw("metric"), r.at("metric"));
  rethrow_as_config([&] {
    g.validate();
    return 0;
  });
  return g;
}

Json to_json(const RenderStyle& s) {
  return {{"design_width", s.design_width},
          {"overlay_width", s.overlay_width},
          {"design_color", s.design_color},
          {"overlay_color", s.overlay_color},
          {"background", s.background}};
}

RenderStyle render_style_from_json(const Json& j, const std::string& where) {
  Reader r(j, where, {"design_width", "overlay_width", "design_color", "overlay_color", "background"});
  RenderStyle s;
  r.number("design_width", s.design_width);
  r.number("overlay_width", s.overlay_width);
  r.string("design_color", s.design_color);
  r.string("overlay_color", s.overlay_color);
  r.string("background", s.background);
  if (!(s.design_width > 0) || !(s.overlay_width > 0)) bad(where, "stroke widths must be positive");
  for (const auto* c : {&s.design_color, &s.overlay_color, &s.background}) {
    if (c->size() != 7 || (*c)[0] != '#' ||
        c->find_first_not_of("0123456789abcdefABCDEF", 1) != std::string::npos) {
      bad(where, "colors must look like #RRGGBB, got \"" + *c + "\"");
    }
  }
  return s;
}

Json to_json(const EndpointConfig& e) {
  return {{"url", e.url},
          {"model", e.model},
          {"api_key_env", e.api_key_env},
          {"temperature", e.temperature},
          {"top_p", e.top_p},
          {"max_tokens", e.max_tokens},
          {"max_attempts", e.max_attempts},
          {"backoff_initial", e.backoff_initial},
          {"backoff_max", e.backoff_max},
          {"timeout", e.timeout},
          {"max_concurrent", e.max_concurrent},
          {"requests_per_minute", e.requests_per_minute}};
}

EndpointConfig endpoint_config_from_json(const Json& j, const std::string& where) {
  Reader r(j, where,
           {"preset", "url", "model", "api_key_env", "temperature", "top_p", "max_tokens", "max_attempts",
            "backoff_initial", "backoff_max", "timeout", "max_concurrent", "requests_per_minute"});
  EndpointConfig e;
  if (r.has("preset")) {
    std::string p;
    r.string("preset", p);
    if (p == "open_weights") {
      e = EndpointConfig::open_weights();
    } else if (p != "default") {
      bad(r.at("preset"), "expected \"default\" or \"open_weights\"");
    }
  }
  r.string("url", e.url);
  r.string("model", e.model);
  r.string("api_key_env", e.api_key_env);
  r.number("temperature", e.temperature);
  r.number("top_p", e.top_p);
  r.integer("max_tokens", e.max_tokens);
  r.integer("max_attempts", e.max_attempts);
  r.number("backoff_initial", e.backoff_initial);
  r.number("backoff_max", e.backoff_max);
  r.number("timeout", e.timeout);
  r.integer("max_concurrent", e.max_concurrent);
  r.number("requests_per_minute", e.requests_per_minute);
  try {
    e.validate();
  } catch (const Error& err) {
    bad(where, err.what());
  }
  return e;
}

GlobalConfig global_config_from_json(const Json& j) {
  Reader r(j, "", {"metric", "render", "image_size", "game", "endpoint", "server", "seed"});
  GlobalConfig c;
  if (r.has("metric")) c.metric = metric_config_from_json(r.raw("metric"), "/metric");
  c.game.metric = c.metric;
  if (r.has("render")) c.render = render_style_from_json(r.raw("render"), "/render");
  r.integer("image_size", c.image_size);
  if (c.image_size < 16 || c.image_size > 4096) bad("/image_size", "expected 16..4096");
  if (r.has("game")) {
    Json g = r.raw("game");
    if (g.is_object() && !g.contains("metric")) g["metric"] = to_json(c.metric);
    c.game = game_config_from_json(g, "/game");
  }
  if (r.has("endpoint")) c.endpoint = endpoint_config_from_json(r.raw("endpoint"), "/endpoint");
  if (r.has("server")) {
    Reader s(r.raw("server"), "/server",
             {"host", "port", "data_dir", "targets", "heartbeat", "disconnect_grace", "reveal_distance"});
    s.string("host", c.server.host);
    s.integer("port", c.server.port);
    if (c.server.port < 0 || c.server.port > 65535) bad("/server/port", "expected 0..65535");
    std::string dir = c.server.data_dir.string();
    s.string("data_dir", dir);
    c.server.data_dir = dir;
    if (s.has("targets")) {
      std::string t;
      s.string("targets", t);
      c.server.targets = t;
    }
    s.number("heartbeat", c.server.heartbeat);
    s.number("disconnect_grace", c.server.disconnect_grace);
    if (!(c.server.heartbeat > 0) || !(c.server.disconnect_grace > 0)) bad("/server", "intervals must be positive");
    s.boolean("reveal_distance", c.server.reveal_distance);
  }
  if (r.has("seed")) {
    if (!r.raw("seed").is_number_unsigned()) bad("/seed", "expected a non-negative integer");
    c.seed = r.raw("seed").get<std::uint64_t>();
  }
  return c;
}

GlobalConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = parse_json(ss.str(), path.string());
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return global_config_from_json(j);
}

Json to_json(const GlobalConfig& c) {
  Json server{{"host", c.server.host},
              {"port", c.server.port},
              {"data_dir", c.server.data_dir.string()},
              {"heartbeat", c.server.heartbeat},
              {"disconnect_grace", c.server.disconnect_grace},
              {"reveal_distance", c.server.reveal_distance}};
  if (c.server.targets) server["targets"] = c.server.targets->string();
  Json game = to_json(c.game);
  return {{"metric", to_json(c.metric)},
          {"render", to_json(c.render)},
          {"image_size", c.image_size},
          {"game", std::move(game)},
          {"endpoint", to_json(c.endpoint)},
          {"server", std::move(server)},
          {"seed", c.seed}};
}

}  // namespace mrcad
