// SPDX-License-Identifier: Apache-2.0

#include "mrcad/bridge.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <thread>

#include "mrcad/digest.hpp"
#include "mrcad/error.hpp"

namespace mrcad {

namespace {

Json text_part(const std::string& text) { return {{"type", "text"}, {"text", text}}; }

Json image_part(const Design& design, const Drawing& overlay, const PromptConfig& prompt) {
  const Bitmap bmp = rasterize(Scene{design, overlay, prompt.style}, prompt.image_size, prompt.image_size);
  return {{"type", "image_url"},
          {"image_url", {{"url", "data:image/png;base64," + base64_encode(encode_png(bmp))}}}};
}

Json instruction_turn(int round, bool first, const Design& current, const Message& message,
                      const PromptConfig& prompt) {
  Json content = Json::array();
  if (first) content.push_back(text_part("New game:"));
  content.push_back(text_part("Round " + std::to_string(round) + ". "));
  content.push_back(image_part(current, message.drawing, prompt));
  if (message.has_text()) content.push_back(text_part(message.text));
  content.push_back(text_part(kEditDirective));
  return {{"role", "user"}, {"content", std::move(content)}};
}

Json object_schema(Json properties, std::vector<std::string> required) {
  return {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)},
          {"additionalProperties", false}};
}

Json tool(const std::string& name, const std::string& description, Json parameters) {
  return {{"type", "function"},
          {"function", {{"name", name}, {"description", description}, {"parameters", std::move(parameters)}}}};
}

Json point_schema() {
  return {{"type", "array"},
          {"items", {{"type", "number"}, {"minimum", -20}, {"maximum", 20}}},
          {"minItems", 2},
          {"maxItems", 2}};
}

Json curve_properties() {
  return {{"type", {{"type", "string"}, {"enum", {"line", "arc", "circle"}}}},
          {"control_points",
           {{"type", "array"},
            {"items", point_schema()},
            {"minItems", 2},
            {"maxItems", 3},
            {"description", "line: two endpoints; arc: start, middle, end; circle: two diameter endpoints"}}}};
}

double seconds_until(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(t - std::chrono::steady_clock::now()).count();
}

}  // namespace

EndpointConfig EndpointConfig::open_weights() {
  EndpointConfig cfg;
  cfg.temperature = 0.7;
  cfg.top_p = 0.95;
  return cfg;
}

void EndpointConfig::validate() const {
  const auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "endpoint: " + what); };
  if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0) bad("url must start with http:// or https://");
  if (model.empty()) bad("model is empty");
  if (!(temperature >= 0.0)) bad("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) bad("top_p must be in (0, 1]");
  if (max_tokens < 1) bad("max_tokens must be >= 1");
  if (max_attempts < 1) bad("max_attempts must be >= 1");
  if (!(backoff_initial >= 0.0) || !(backoff_max >= backoff_initial)) bad("backoff must satisfy 0 <= initial <= max");
  if (!(timeout > 0.0)) bad("timeout must be > 0");
  if (max_concurrent < 1) bad("max_concurrent must be >= 1");
  if (!(requests_per_minute >= 0.0)) bad("requests_per_minute must be >= 0");
}

std::string PromptConfig::default_system_prompt() {
  return "You are an expert CAD software user playing a game called mrCAD. In this game, there is a designer and a "
         "maker. The two players work together to iteratively create a design over a sequence of turns. You will "
         "play the role of the maker in this game, and the user will play the role of the designer. In each turn "
         "the designer provides an instruction about how to modify the design on the canvas. The instruction may "
         "include language instructions, drawings on the canvas, or both. The drawings appear as red strokes on "
         "the canvas. The design appears in black strokes on the canvas. Your goal is to follow the designer's "
         "instructions. You have to take actions to edit the current state of the design. Each action is taken "
         "by calling a tool that performs the action. Each control point is a pair of floating point numbers "
         "between -20 and 20 that represent the coordinates of the point on the canvas.";
}

Json tool_schemas() {
  Json move_curve_props = curve_properties();
  move_curve_props["delta"] = point_schema();
  move_curve_props["delta"].erase("items");
  move_curve_props["delta"]["items"] = {{"type", "number"}};
  return Json::array({
      tool("make_curve", "Add a curve to the design.", object_schema(curve_properties(), {"type", "control_points"})),
      tool("remove_curve", "Remove the curve with these control points.",
           object_schema(curve_properties(), {"type", "control_points"})),
      tool("move_curve", "Translate the curve with these control points by delta.",
           object_schema(std::move(move_curve_props), {"type", "control_points", "delta"})),
      tool("move_point", "Move a control point, and every curve sharing it, to a new position.",
           object_schema({{"point", point_schema()}, {"new_point", point_schema()}}, {"point", "new_point"})),
      tool("delete_point", "Delete a control point and every curve that uses it.",
           object_schema({{"point", point_schema()}}, {"point"})),
  });
}

Json build_request(const MakerInput& input, const EndpointConfig& endpoint, const PromptConfig& prompt) {
  Json messages = Json::array();
  messages.push_back({{"role", "system"}, {"content", prompt.system}});
  int call_no = 0;
  for (std::size_t i = 0; i < input.history.size(); ++i) {
    const Round& r = input.history[i];
    messages.push_back(instruction_turn(static_cast<int>(i) + 1, i == 0, r.design_before, r.message, prompt));
    Json calls = Json::array();
    for (const auto& a : r.actions) {
      const Json j = to_json(a);
      calls.push_back({{"id", "call_" + std::to_string(++call_no)},
                       {"type", "function"},
                       {"function", {{"name", j["name"]}, {"arguments", dump(j["arguments"])}}}});
    }
    if (calls.empty()) {
      messages.push_back({{"role", "assistant"}, {"content", "[]"}});
    } else {
      messages.push_back({{"role", "assistant"}, {"content", nullptr}, {"tool_calls", calls}});
      for (const auto& c : calls) messages.push_back({{"role", "tool"}, {"tool_call_id", c["id"]}, {"content", "ok"}});
    }
    Json feedback = Json::array({text_part("The resulting design is:")});
    if (prompt.history_images) feedback.push_back(image_part(r.design_after, {}, prompt));
    feedback.push_back(text_part(dump(to_json(r.design_after))));
    messages.push_back({{"role", "user"}, {"content", std::move(feedback)}});
  }
  messages.push_back(instruction_turn(std::max(1, input.round), input.history.empty(), input.current, input.message, prompt));
  return {{"model", endpoint.model},       {"messages", std::move(messages)}, {"tools", tool_schemas()},
          {"tool_choice", "auto"},         {"temperature", endpoint.temperature}, {"top_p", endpoint.top_p},
          {"max_tokens", endpoint.max_tokens}};
}

Action parse_tool_call(const Json& name, const Json& arguments) {
  if (!name.is_string()) throw Error(ErrorCode::MalformedToolCall, "tool name is not a string");
  const std::string n = name.get<std::string>();
  static const std::vector<std::string> known{"make_curve", "remove_curve", "move_curve", "move_point",
                                              "delete_point"};
  if (std::find(known.begin(), known.end(), n) == known.end()) {
    throw Error(ErrorCode::MalformedToolCall, "unknown tool '" + n + "'");
  }
  Json args = arguments;
  if (args.is_string()) {
    try {
      args = parse_json(args.get<std::string>());
    } catch (const Error&) {
      throw Error(ErrorCode::MalformedToolCall, n + ": arguments are not JSON");
    }
  }
  try {
    return action_from_json(Json{{"name", n}, {"arguments", args}});
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedToolCall, n + ": " + e.what());
  }
}

ParsedCalls parse_tool_calls(const Json& response) {
  ParsedCalls out;
  const auto take = [&](const Json& name, const Json& args) {
    try {
      out.actions.push_back(parse_tool_call(name, args));
    } catch (const Error& e) {
      out.skipped.push_back(e.what());
    }
  };
  if (!response.is_object() || !response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty()) {
    throw Error(ErrorCode::TransportError, "response has no choices");
  }
  const Json& msg = response["choices"][0].value("message", Json::object());
  if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
    for (const auto& call : msg["tool_calls"]) {
      const Json fn = call.is_object() ? call.value("function", Json::object()) : Json::object();
      take(fn.value("name", Json()), fn.value("arguments", Json::object()));
    }
    return out;
  }
  if (!msg.contains("content") || !msg["content"].is_string()) return out;
  const std::string content = msg["content"].get<std::string>();
  const auto lo = content.find('[');
  const auto hi = content.rfind(']');
  if (lo == std::string::npos || hi == std::string::npos || hi < lo) return out;
  Json calls;
  try {
    calls = parse_json(std::string_view(content).substr(lo, hi - lo + 1));
  } catch (const Error&) {
    out.skipped.push_back("content is not a JSON array of tool calls");
    return out;
  }
  for (const auto& call : calls) {
    if (!call.is_object()) {
      out.skipped.push_back("tool call is not an object");
      continue;
    }
    take(call.value("name", Json()), call.value("arguments", Json::object()));
  }
  return out;
}

HttpTransport::HttpTransport(EndpointConfig cfg, std::function<void(double)> sleeper)
    : cfg_(std::move(cfg)), sleep_(std::move(sleeper)) {
  cfg_.validate();
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.url, m, url_re)) throw Error(ErrorCode::InvalidConfig, "endpoint: bad url");
  origin_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
  if (!sleep_) {
    sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

Json HttpTransport::complete(const Json& request) {
  double wait = 0.0;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < cfg_.max_concurrent; });
    ++in_flight_;
    if (cfg_.requests_per_minute > 0.0) {
      const auto now = std::chrono::steady_clock::now();
      const auto slot = std::max(now, next_slot_);
      wait = seconds_until(slot);
      next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(60.0 / cfg_.requests_per_minute));
    }
  }
  struct Release {
    HttpTransport* t;
    ~Release() {
      {
        std::lock_guard lock(t->mu_);
        --t->in_flight_;
      }
      t->cv_.notify_one();
    }
  } release{this};
  if (wait > 0.0) sleep_(wait);

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = request.dump();
  const auto secs = static_cast<time_t>(cfg_.timeout);
  const auto usecs = static_cast<time_t>((cfg_.timeout - static_cast<double>(secs)) * 1e6);
  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    if (attempt > 1) sleep_(std::min(cfg_.backoff_max, cfg_.backoff_initial * std::pow(2.0, attempt - 2)));
    {
      std::lock_guard lock(mu_);
      ++attempts_;
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    const auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return parse_json(res->body);
      } catch (const Error& e) {
        throw Error(ErrorCode::TransportError, std::string("response is not JSON: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) {
      throw Error(ErrorCode::TransportError, last_error + ": " + res->body.substr(0, 200));
    }
  }
  throw Error(ErrorCode::TransportError,
              "giving up after " + std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
}

std::string request_key(const Json& request) { return sha256_hex(dump(request)); }

ReplayTransport::ReplayTransport(std::istream& transcript) { load(transcript); }

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
  std::ifstream in(transcript);
  if (!in) throw Error(ErrorCode::TransportError, "cannot open transcript " + transcript.string());
  load(in);
}

void ReplayTransport::load(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Json j = parse_json(line, "transcript:" + std::to_string(n));
    if (!j.is_object() || !j.contains("response")) {
      throw Error(ErrorCode::SchemaError, "transcript:" + std::to_string(n) + ": expected {\"response\": ...}");
    }
    if (j.contains("key") && j["key"].is_string()) {
      keyed_[j["key"].get<std::string>()] = j["response"];
    } else {
      ordered_.push_back(j["response"]);
    }
  }
}

Json ReplayTransport::complete(const Json& request) {
  const std::string key = request_key(request);
  std::lock_guard lock(mu_);
  if (auto it = keyed_.find(key); it != keyed_.end()) return it->second;
  if (next_ < ordered_.size()) return ordered_[next_++];
  throw Error(ErrorCode::TransportError, "transcript has no response for request " + key.substr(0, 16));
}

Json RecordingTransport::complete(const Json& request) {
  Json response = inner_.complete(request);
  std::lock_guard lock(mu_);
  out_ << dump(Json{{"key", request_key(request)}, {"response", response}}) << '\n';
  out_.flush();
  return response;
}

ChatMaker::ChatMaker(std::shared_ptr<Transport> transport, EndpointConfig endpoint, PromptConfig prompt, Logger log)
    : transport_(std::move(transport)), endpoint_(std::move(endpoint)), prompt_(std::move(prompt)),
      log_(std::move(log)) {
  if (!transport_) throw Error(ErrorCode::InvalidConfig, "chat maker needs a transport");
}

std::vector<Action> ChatMaker::propose_actions(const MakerInput& input) {
  const Json response = transport_->complete(build_request(input, endpoint_, prompt_));
  ParsedCalls parsed = parse_tool_calls(response);
  if (log_) {
    for (const auto& s : parsed.skipped) log_("skipped tool call: " + s);
  }
  return std::move(parsed.actions);
}

}  // namespace mrcad
