// SPDX-License-Identifier: Apache-2.0

// Maker agents backed by a chat-completions endpoint: prompt assembly, tool
// schemas, lenient tool-call parsing and the transports that carry requests.

#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrcad/game.hpp"
#include "mrcad/render.hpp"
#include "mrcad/serialize.hpp"

namespace mrcad {

struct EndpointConfig {
  /// Full URL of the chat-completions route.
  std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "default";
  /// Name of the environment variable holding the bearer token. The value is
  /// read at request time and never logged.
  std::string api_key_env = "MRCAD_API_KEY";
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 2048;
  int max_attempts = 4;
  double backoff_initial = 0.5;
  double backoff_max = 8.0;
  double timeout = 120.0;
  int max_concurrent = 4;
  /// 0 disables the rate budget.
  double requests_per_minute = 0.0;

  /// Documented defaults for open-weights presets (temperature 0.7, top-p 0.95).
  static EndpointConfig open_weights();
  void validate() const;
};

struct PromptConfig {
  std::string system = default_system_prompt();
  int image_size = 512;
  RenderStyle style;
  bool history_images = true;

  static std::string default_system_prompt();
};

inline constexpr const char* kEditDirective =
    "Edit the design based on the designer's instructions using the provided tools. Make sure to follow the "
    "instructions carefully.";

/// OpenAI-style "tools" array for the five actions.
Json tool_schemas();

/// Chat request for one maker turn: system text, then per past round the
/// instruction turn, the assistant's tool calls and the environment feedback,
/// then the current instruction.
Json build_request(const MakerInput& input, const EndpointConfig& endpoint, const PromptConfig& prompt);

struct ParsedCalls {
  std::vector<Action> actions;
  /// One line per skipped call.
  std::vector<std::string> skipped;
};

/// Reads tool calls from choices[0].message: "tool_calls" (arguments as a JSON
/// string or object) or, failing that, a JSON array of {"name", "arguments"}
/// in the content. Unknown tools and malformed arguments are skipped.
ParsedCalls parse_tool_calls(const Json& response);
/// One call; throws MalformedToolCall.
Action parse_tool_call(const Json& name, const Json& arguments);

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the response body. Throws TransportError.
  virtual Json complete(const Json& request) = 0;
};

/// HTTP(S) via cpp-httplib: bounded retries with exponential backoff on
/// connection failures, 429 and 5xx; a concurrency cap and optional rate budget.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(EndpointConfig cfg, std::function<void(double)> sleeper = {});
  Json complete(const Json& request) override;
  int attempts() const { return attempts_; }

 private:
  EndpointConfig cfg_;
  std::function<void(double)> sleep_;
  std::string origin_;
  std::string path_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point next_slot_{};
  int attempts_ = 0;
};

/// Stable digest of a request, used to key transcripts.
std::string request_key(const Json& request);

/// Serves responses from a JSONL transcript. Lines are {"key": ..., "response":
/// ...}; keyed lines match by request_key, lines without a key are served in
/// order.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(std::istream& transcript);
  explicit ReplayTransport(const std::filesystem::path& transcript);
  Json complete(const Json& request) override;

 private:
  void load(std::istream& in);
  std::mutex mu_;
  std::unordered_map<std::string, Json> keyed_;
  std::vector<Json> ordered_;
  std::size_t next_ = 0;
};

/// Forwards to another transport and appends {"key", "response"} lines.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(Transport& inner, std::ostream& out) : inner_(inner), out_(out) {}
  Json complete(const Json& request) override;

 private:
  Transport& inner_;
  std::ostream& out_;
  std::mutex mu_;
};

class ChatMaker : public MakerAgent {
 public:
  using Logger = std::function<void(const std::string&)>;
  ChatMaker(std::shared_ptr<Transport> transport, EndpointConfig endpoint, PromptConfig prompt = {},
            Logger log = {});
  std::vector<Action> propose_actions(const MakerInput& input) override;
  std::string name() const override { return "chat:" + endpoint_.model; }

 private:
  std::shared_ptr<Transport> transport_;
  EndpointConfig endpoint_;
  PromptConfig prompt_;
  Logger log_;
};

}  // namespace mrcad
