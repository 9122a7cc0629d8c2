// SPDX-License-Identifier: Apache-2.0

// Turn-based game service: sessions with join tokens and roles, an ordered
// event log per session, rollout persistence and the HTTP front end.

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mrcad/game.hpp"
#include "mrcad/serialize.hpp"

namespace httplib {
class Server;
}

namespace mrcad {

enum class Phase { waiting, designer_turn, maker_turn, finished };
enum class Role { designer, maker };
std::string_view to_string(Phase p);
std::string_view to_string(Role r);
std::optional<Role> role_from_string(std::string_view s);

struct Event {
  std::uint64_t seq = 0;
  /// joined, message_posted, actions_applied, submit_result, timer, finished
  std::string kind;
  Json payload = Json::object();
};

Json to_json(const Event& e);
Event event_from_json(const Json& j, const std::string& where = "");

/// Where finished rollouts and event logs go.
class Storage {
 public:
  virtual ~Storage() = default;
  /// Called once per session before any event, with the hidden header
  /// (config, target, meta).
  virtual void open_log(const std::string& session_id, const Json& header) = 0;
  virtual void append_event(const std::string& session_id, const Event& event) = 0;
  virtual void append_rollout(const Rollout& rollout) = 0;
};

class MemoryStorage : public Storage {
 public:
  void open_log(const std::string& session_id, const Json& header) override;
  void append_event(const std::string& session_id, const Event& event) override;
  void append_rollout(const Rollout& rollout) override;

  /// Header line followed by one event per line, as a file log would hold.
  std::string log(const std::string& session_id) const;
  std::vector<Rollout> rollouts() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Json>> logs_;
  std::vector<Rollout> rollouts_;
};

/// <dir>/rollouts.ndjson (append-only) and <dir>/events/<session>.ndjson.
class FileStorage : public Storage {
 public:
  explicit FileStorage(std::filesystem::path dir);
  void open_log(const std::string& session_id, const Json& header) override;
  void append_event(const std::string& session_id, const Event& event) override;
  void append_rollout(const Rollout& rollout) override;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

/// Rebuilds the rollout of a finished session from its log (header line plus
/// events). Throws SchemaError if the log is incomplete or inconsistent.
Rollout rollout_from_log(std::istream& log);

struct SessionOptions {
  GameConfig config = condition_preset("dataset");
  Design target;
  /// Role of whoever joins first; random when unset.
  std::optional<Role> first_role;
  /// Include the numeric distance in maker-visible feedback.
  bool reveal_distance = true;
  std::string dyad;
};

struct ServerSettings {
  double heartbeat = 5.0;
  double disconnect_grace = 60.0;
  std::uint64_t seed = 0;
};

class SessionManager;

class Session {
 public:
  const std::string& id() const { return id_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  struct JoinResult {
    Role role;
    Json view;
    std::vector<Event> events;
  };
  /// Throws BadToken, SessionFull.
  JoinResult join(const std::string& token);
  Json view(const std::string& token);
  /// Throws BadToken, NotYourTurn and engine errors.
  Json post_message(const std::string& token, const Message& message);
  Json post_actions(const std::string& token, const std::vector<Action>& actions, bool submit = false);
  Json request_submit(const std::string& token);

  /// Events with seq >= from; waits up to `timeout` seconds when none are
  /// available yet.
  std::vector<Event> events_since(std::uint64_t from, double timeout = 0.0);
  /// Checks the clock and participant liveness. Returns true if still active.
  bool tick();
  Phase phase() const;
  std::optional<Rollout> rollout() const;
  /// Keeps a role alive for the disconnect grace (event-stream readers).
  void touch(const std::string& token);

 private:
  friend class SessionManager;
  Session(std::string id, SessionOptions opts, SessionManager& owner, std::vector<std::string> tokens, Role first);

  Role role_of(const std::string& token) const;
  void charge_clock();
  void emit(std::string kind, Json payload);
  Json view_for(Role role) const;
  Json finish(bool submitted, std::string reason);
  Json request_submit_locked();
  bool timed_out() const;

  std::string id_;
  SessionOptions opts_;
  SessionManager& owner_;
  std::vector<std::string> tokens_;
  Role first_role_;
  std::map<std::string, Role> joined_;
  std::map<Role, double> last_seen_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  Game game_;
  Phase phase_ = Phase::waiting;
  std::optional<Message> pending_;
  bool may_submit_ = false;
  double last_tick_ = 0.0;
  double round_time_ = 0.0;
  std::vector<Event> events_;
  std::optional<Rollout> rollout_;
};

class SessionManager {
 public:
  using ClockFn = std::function<double()>;
  SessionManager(std::shared_ptr<Storage> storage, ServerSettings settings = {}, ClockFn clock = {});

  /// Targets used when a session is created without one; the smiley face
  /// when empty.
  void set_target_pool(std::vector<Design> pool);
  /// Throws InvalidConfig, DyadEjected.
  std::shared_ptr<Session> create(SessionOptions opts);
  /// Throws SessionNotFound.
  std::shared_ptr<Session> get(const std::string& id) const;
  /// Ticks every session; returns how many are still active.
  int tick_all();
  std::optional<Dyad> dyad(const std::string& id) const;
  const ServerSettings& settings() const { return settings_; }
  double now() const { return clock_(); }

 private:
  friend class Session;
  void record_outcome(const std::string& dyad, Outcome outcome, int& lives_left);
  std::string random_hex(int bytes);

  std::shared_ptr<Storage> storage_;
  ServerSettings settings_;
  ClockFn clock_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, Dyad> dyads_;
  std::vector<Design> pool_;
};

/// Parses a POST /sessions body: {"preset", "config", "target", "dyad",
/// "first_role", "reveal_distance"}. "target" is a design object or "smiley".
SessionOptions session_options_from_json(const Json& body);

/// HTTP endpoints over a SessionManager plus a heartbeat thread.
class HttpServer {
 public:
  explicit HttpServer(SessionManager& manager);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Returns the bound port (0 picks a free one). Throws InvalidConfig.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  /// bind + listen on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  SessionManager& manager_;
  std::unique_ptr<httplib::Server> http_;
  std::thread worker_;
  std::thread heartbeat_;
  std::atomic<bool> stopping_{false};
  std::mutex hb_mu_;
  std::condition_variable hb_cv_;
};

}  // namespace mrcad
