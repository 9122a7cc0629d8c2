// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "mrcad/bridge.hpp"
#include "mrcad/digest.hpp"
#include "mrcad/error.hpp"
#include "mrcad/eval.hpp"

using namespace mrcad;

namespace {

Json response_with_calls(Json calls) {
  return {{"choices", Json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"tool_calls", calls}}}}})}};
}

Json response_with_content(const std::string& content) {
  return {{"choices", Json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}})}};
}

Json call(const std::string& name, Json args) {
  return {{"id", "c"}, {"type", "function"}, {"function", {{"name", name}, {"arguments", args}}}};
}

Design clock_target() {
  return Design::from_curves({Curve::circle({0, -18}, {0, 18}), Curve::circle({0, -16}, {0, 16}), Curve::line({0, 0}, {0, 10}),
                 Curve::line({0, 0}, {7, 0})});
}

std::vector<EvalItem> clock_items() {
  EvalItem first;
  first.rollout_id = "clock";
  first.round_index = 1;
  first.message = {"big round circle with a smaller circle inside it sort of resembling a clock ", {}};
  first.target = clock_target();
  EvalItem second = first;
  second.round_index = 2;
  second.current = Design::from_curves({Curve::circle({0, -18}, {0, 18}), Curve::circle({0, -16}, {0, 16})});
  second.message = {"add the hands", Drawing{{Stroke{{{0, 0}, {0, 10}}}}}};
  Round r1;
  r1.message = first.message;
  r1.actions = {MakeCurve{Curve::circle({0, -18}, {0, 18})}, MakeCurve{Curve::circle({0, -16}, {0, 16})}};
  r1.design_after = second.current;
  second.history = {r1};
  return {first, second};
}

// Minimal chat endpoint on an ephemeral port.
struct MockServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  explicit MockServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockServer() {
    server.stop();
    thread.join();
  }
  EndpointConfig endpoint() const {
    EndpointConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "mock";
    cfg.timeout = 5;
    return cfg;
  }
};

}  // namespace

TEST_CASE("base64 and sha256 known vectors") {
  CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
  CHECK(base64_encode({'M', 'a'}) == "TWE=");
  CHECK(base64_encode({'M'}) == "TQ==");
  CHECK(base64_encode({}) == "");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("example prompt tool calls parse to the expected actions") {
  const Json example_calls = parse_json(
      R"([{"name": "make_curve", "arguments": {"type": "circle", "control_points": [[0.0, -18.0], [0.0, 18.0]]}},)"
      R"( {"name": "make_curve", "arguments": {"type": "circle", "control_points": [[0.0, -15.0], [0.0, 15.0]]}},)"
      R"( {"name": "move_point", "arguments": {"point": [0.0, -15.0], "new_point": [0.0, -16.0]}}])");
  std::vector<Action> got;
  for (const auto& c : example_calls) got.push_back(parse_tool_call(c["name"], c["arguments"]));
  const std::vector<Action> want{MakeCurve{Curve::circle({0, -18}, {0, 18})},
                                 MakeCurve{Curve::circle({0, -15}, {0, 15})}, MovePoint{{0, -15}, {0, -16}}};
  CHECK(got == want);

  SUBCASE("as content text") {
    const auto parsed = parse_tool_calls(response_with_content("Here you go:\n" + example_calls.dump() + "\n"));
    CHECK(parsed.actions == want);
    CHECK(parsed.skipped.empty());
  }
  SUBCASE("as tool_calls with string arguments") {
    Json calls = Json::array();
    for (const auto& c : example_calls) calls.push_back(call(c["name"], c["arguments"].dump()));
    CHECK(parse_tool_calls(response_with_calls(calls)).actions == want);
  }
  SUBCASE("as tool_calls with object arguments") {
    Json calls = Json::array();
    for (const auto& c : example_calls) calls.push_back(call(c["name"], c["arguments"]));
    CHECK(parse_tool_calls(response_with_calls(calls)).actions == want);
  }
}

TEST_CASE("unknown and malformed tool calls are skipped") {
  const Json calls = Json::array({
      call("teleport", Json{{"point", {0, 0}}}),
      call("make_curve", "{not json"),
      call("make_curve", Json{{"type", "spline"}, {"control_points", {{0, 0}, {1, 1}}}}),
      call("delete_point", Json{{"point", {1, 2}}, {"extra", 1}}),
      call("delete_point", Json{{"point", {1, 2}}}),
  });
  const auto parsed = parse_tool_calls(response_with_calls(calls));
  REQUIRE(parsed.actions.size() == 1);
  CHECK(parsed.actions[0] == Action{DeletePoint{{1, 2}}});
  REQUIRE(parsed.skipped.size() == 4);
  CHECK(parsed.skipped[0].find("teleport") != std::string::npos);
  CHECK_THROWS_AS(parse_tool_call("teleport", Json::object()), Error);

  CHECK(parse_tool_calls(response_with_content("I am not sure what to do.")).actions.empty());
  CHECK(parse_tool_calls(response_with_content("[1, 2")).actions.empty());
  CHECK_THROWS_AS(parse_tool_calls(Json::object()), Error);
}

TEST_CASE("tool schemas cover the five actions") {
  const Json tools = tool_schemas();
  std::vector<std::string> names;
  for (const auto& t : tools) names.push_back(t["function"]["name"]);
  CHECK(names == std::vector<std::string>{"make_curve", "remove_curve", "move_curve", "move_point", "delete_point"});
  CHECK(tools[2]["function"]["parameters"]["required"] == Json({"type", "control_points", "delta"}));
}

TEST_CASE("request layout") {
  const auto items = clock_items();
  EndpointConfig ep;
  ep.model = "m";
  PromptConfig prompt;
  prompt.image_size = 64;

  SUBCASE("first round") {
    const auto& it = items[0];
    const Json req = build_request({it.message, it.current, it.history, 1, 0}, ep, prompt);
    CHECK(req["model"] == "m");
    CHECK(req["temperature"] == 1.0);
    CHECK(req["top_p"] == 1.0);
    const Json& msgs = req["messages"];
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0]["role"] == "system");
    const std::string sys = msgs[0]["content"];
    CHECK(sys.rfind("You are an expert CAD software user playing a game called mrCAD.", 0) == 0);
    CHECK(sys.find("between -20 and 20 that represent the coordinates of the point on the canvas.") != std::string::npos);
    const Json& parts = msgs[1]["content"];
    REQUIRE(parts.size() == 5);
    CHECK(parts[0]["text"] == "New game:");
    CHECK(parts[1]["text"] == "Round 1. ");
    const std::string url = parts[2]["image_url"]["url"];
    CHECK(url.rfind("data:image/png;base64,iVBORw0KGgo", 0) == 0);
    CHECK(parts[3]["text"] == it.message.text);
    CHECK(parts[4]["text"] == kEditDirective);
  }

  SUBCASE("refinement round carries history") {
    const auto& it = items[1];
    const Json req = build_request({it.message, it.current, it.history, 2, 0}, ep, prompt);
    const Json& msgs = req["messages"];
    // system, round-1 instruction, assistant, 2 tool results, feedback, round-2 instruction
    REQUIRE(msgs.size() == 7);
    CHECK(msgs[2]["role"] == "assistant");
    REQUIRE(msgs[2]["tool_calls"].size() == 2);
    CHECK(msgs[2]["tool_calls"][0]["function"]["name"] == "make_curve");
    const Json args = parse_json(msgs[2]["tool_calls"][0]["function"]["arguments"].get<std::string>());
    CHECK(args == Json{{"type", "circle"}, {"control_points", {{0.0, -18.0}, {0.0, 18.0}}}});
    CHECK(msgs[3]["role"] == "tool");
    CHECK(msgs[3]["tool_call_id"] == msgs[2]["tool_calls"][0]["id"]);
    CHECK(msgs[5]["content"][0]["text"] == "The resulting design is:");
    CHECK(parse_json(msgs[5]["content"][2]["text"].get<std::string>()) == to_json(it.current));
    const Json& last = msgs[6]["content"];
    CHECK(last[0]["text"] == "Round 2. ");
    CHECK(last[2]["text"] == "add the hands");
  }

  SUBCASE("ablated text leaves no instruction part") {
    const auto& it = items[0];
    const Message m = ablate(it.message, AblationMode::drop_text);
    const Json req = build_request({m, it.current, it.history, 1, 0}, ep, prompt);
    const Json& parts = req["messages"][1]["content"];
    REQUIRE(parts.size() == 4);
    CHECK(parts[3]["text"] == kEditDirective);
  }

  SUBCASE("drawing shows up in the image") {
    const auto& it = items[1];
    Message plain = it.message;
    plain.drawing = {};
    const Json a = build_request({it.message, it.current, {}, 2, 0}, ep, prompt);
    const Json b = build_request({plain, it.current, {}, 2, 0}, ep, prompt);
    CHECK(a["messages"][1]["content"][2] != b["messages"][1]["content"][2]);
  }
}

TEST_CASE("endpoint presets and validation") {
  const auto ow = EndpointConfig::open_weights();
  CHECK(ow.temperature == 0.7);
  CHECK(ow.top_p == 0.95);
  EndpointConfig bad;
  bad.url = "ftp://x";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.max_concurrent = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("http transport retries server errors and sends the bearer key") {
  std::atomic<int> hits{0};
  std::string auth;
  MockServer mock([&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    auth = req.get_header_value("Authorization");
    res.set_content(response_with_content("[]").dump(), "application/json");
  });
  ::setenv("MRCAD_TEST_KEY", "sekrit", 1);
  auto cfg = mock.endpoint();
  cfg.api_key_env = "MRCAD_TEST_KEY";
  std::vector<double> sleeps;
  HttpTransport http(cfg, [&](double s) { sleeps.push_back(s); });
  const Json res = http.complete(Json{{"model", "mock"}});
  CHECK(res["choices"][0]["message"]["content"] == "[]");
  CHECK(http.attempts() == 2);
  CHECK(hits == 2);
  CHECK(auth == "Bearer sekrit");
  CHECK(sleeps == std::vector<double>{0.5});
}

TEST_CASE("http transport gives up") {
  SUBCASE("client errors are not retried") {
    MockServer mock([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    HttpTransport http(mock.endpoint(), [](double) {});
    CHECK_THROWS_AS(http.complete(Json::object()), Error);
    CHECK(http.attempts() == 1);
  }
  SUBCASE("rate limiting is retried with capped backoff") {
    MockServer mock([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
    auto cfg = mock.endpoint();
    cfg.max_attempts = 5;
    cfg.backoff_initial = 1;
    cfg.backoff_max = 3;
    std::vector<double> sleeps;
    HttpTransport http(cfg, [&](double s) { sleeps.push_back(s); });
    try {
      http.complete(Json::object());
      FAIL("expected TransportError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TransportError);
    }
    CHECK(http.attempts() == 5);
    CHECK(sleeps == std::vector<double>{1, 2, 3, 3});
  }
  SUBCASE("connection refused") {
    int port = 0;
    {
      MockServer mock([](const httplib::Request&, httplib::Response&) {});
      port = mock.port;
    }
    EndpointConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.max_attempts = 2;
    cfg.timeout = 2;
    HttpTransport http(cfg, [](double) {});
    CHECK_THROWS_AS(http.complete(Json::object()), Error);
    CHECK(http.attempts() == 2);
  }
}

TEST_CASE("http transport caps concurrency") {
  std::atomic<int> active{0}, peak{0};
  MockServer mock([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    --active;
    res.set_content("{}", "application/json");
  });
  auto cfg = mock.endpoint();
  cfg.max_concurrent = 2;
  HttpTransport http(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { http.complete(Json::object()); });
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(http.attempts() == 6);
}

TEST_CASE("rate budget spaces requests") {
  MockServer mock([](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
  auto cfg = mock.endpoint();
  cfg.requests_per_minute = 60;
  std::vector<double> sleeps;
  HttpTransport http(cfg, [&](double s) { sleeps.push_back(s); });
  for (int i = 0; i < 3; ++i) http.complete(Json::object());
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(sleeps[1] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("recorded transcript replays by key") {
  MockServer mock([](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_json(req.body);
    const bool first = body["messages"].size() == 2;
    res.set_content(response_with_content(first ? "[]" : "[{\"name\":\"delete_point\",\"arguments\":{\"point\":[0,18]}}]").dump(),
                    "application/json");
  });
  const auto items = clock_items();
  std::ostringstream transcript;
  PromptConfig prompt;
  prompt.image_size = 64;
  EvalReport live;
  {
    HttpTransport http(mock.endpoint());
    auto rec = std::make_shared<RecordingTransport>(http, transcript);
    ChatMaker maker(rec, mock.endpoint(), prompt);
    live = evaluate(maker, items);
  }
  std::istringstream in(transcript.str());
  auto replay = std::make_shared<ReplayTransport>(in);
  ChatMaker maker(replay, mock.endpoint(), prompt);
  // Reverse order still matches, since lines are keyed.
  std::vector<EvalItem> reversed(items.rbegin(), items.rend());
  const EvalReport again = evaluate(maker, reversed);
  CHECK(again.items[0].pi == live.items[1].pi);
  CHECK(again.items[1].pi == live.items[0].pi);
  CHECK(live.items[0].pi == 0.0);
  CHECK(live.items[1].pi != 0.0);
  CHECK(again.overall.failures == 0);

  std::istringstream empty("");
  ChatMaker starved(std::make_shared<ReplayTransport>(empty), mock.endpoint(), prompt);
  const EvalReport failed = evaluate(starved, items);
  CHECK(failed.overall.failures == 2);
}

TEST_CASE("checked-in clock transcript drives evaluate offline") {
  const auto items = clock_items();
  std::vector<std::string> log;
  auto replay = std::make_shared<ReplayTransport>(std::filesystem::path(MRCAD_TEST_DATA) / "clock_transcript.jsonl");
  EndpointConfig ep;
  ep.url = "http://127.0.0.1:9/unused";
  PromptConfig prompt;
  prompt.image_size = 64;
  ChatMaker maker(replay, ep, prompt, [&](const std::string& s) { log.push_back(s); });
  const EvalReport report = evaluate(maker, items);
  REQUIRE(report.items.size() == 2);
  CHECK(report.overall.failures == 0);

  const std::vector<Action> first{MakeCurve{Curve::circle({0, -18}, {0, 18})},
                                  MakeCurve{Curve::circle({0, -15}, {0, 15})}, MovePoint{{0, -15}, {0, -16}}};
  const std::vector<Action> second{MakeCurve{Curve::line({0, 0}, {0, 10})}, MakeCurve{Curve::line({0, 0}, {7, 0})}};
  CHECK(report.items[0].pi == proportional_improvement(first, items[0]));
  CHECK(report.items[1].pi == proportional_improvement(second, items[1]));
  CHECK(report.items[1].pi == 1.0);
  CHECK(report.items[0].pi > 0.0);
  REQUIRE(log.size() == 1);
  CHECK(log[0].find("teleport") != std::string::npos);
}
