// SPDX-License-Identifier: Apache-2.0

#include "mrcad/server.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "mrcad/config.hpp"
#include "mrcad/error.hpp"

namespace mrcad {

namespace {

Role other(Role r) { return r == Role::designer ? Role::maker : Role::designer; }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json actions_json(std::span<const Action> actions) {
  Json out = Json::array();
  for (const auto& a : actions) out.push_back(to_json(a));
  return out;
}

std::vector<Action> actions_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaError, where + ": expected an array of actions");
  std::vector<Action> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(action_from_json(j[i], where + "/" + std::to_string(i)));
  return out;
}

[[noreturn]] void log_error(const std::string& what) { throw Error(ErrorCode::SchemaError, "event log: " + what); }

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::waiting: return "waiting";
    case Phase::designer_turn: return "designer_turn";
    case Phase::maker_turn: return "maker_turn";
    case Phase::finished: return "finished";
  }
  return "?";
}

std::string_view to_string(Role r) { return r == Role::designer ? "designer" : "maker"; }

std::optional<Role> role_from_string(std::string_view s) {
  if (s == "designer") return Role::designer;
  if (s == "maker") return Role::maker;
  return std::nullopt;
}

Json to_json(const Event& e) { return {{"seq", e.seq}, {"kind", e.kind}, {"payload", e.payload}}; }

Event event_from_json(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("seq") || !j.contains("kind") || !j.contains("payload") ||
      !j["seq"].is_number_unsigned() || !j["kind"].is_string() || !j["payload"].is_object()) {
    throw Error(ErrorCode::SchemaError, (where.empty() ? "/" : where) + ": expected {seq, kind, payload}");
  }
  return {j["seq"].get<std::uint64_t>(), j["kind"].get<std::string>(), j["payload"]};
}

// Storage

void MemoryStorage::open_log(const std::string& session_id, const Json& header) {
  std::lock_guard lock(mu_);
  logs_[session_id] = {header};
}

void MemoryStorage::append_event(const std::string& session_id, const Event& event) {
  std::lock_guard lock(mu_);
  logs_[session_id].push_back(to_json(event));
}

void MemoryStorage::append_rollout(const Rollout& rollout) {
  std::lock_guard lock(mu_);
  rollouts_.push_back(rollout);
}

std::string MemoryStorage::log(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  std::string out;
  auto it = logs_.find(session_id);
  if (it == logs_.end()) return out;
  for (const auto& line : it->second) out += dump(line) + "\n";
  return out;
}

std::vector<Rollout> MemoryStorage::rollouts() const {
  std::lock_guard lock(mu_);
  return rollouts_;
}

FileStorage::FileStorage(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_ / "events", ec);
  if (ec) throw Error(ErrorCode::InvalidConfig, "cannot create " + (dir_ / "events").string() + ": " + ec.message());
}

void FileStorage::open_log(const std::string& session_id, const Json& header) {
  std::lock_guard lock(mu_);
  std::ofstream(dir_ / "events" / (session_id + ".ndjson"), std::ios::trunc) << dump(header) << '\n';
}

void FileStorage::append_event(const std::string& session_id, const Event& event) {
  std::lock_guard lock(mu_);
  std::ofstream(dir_ / "events" / (session_id + ".ndjson"), std::ios::app) << dump(to_json(event)) << '\n';
}

void FileStorage::append_rollout(const Rollout& rollout) {
  std::lock_guard lock(mu_);
  std::ofstream(dir_ / "rollouts.ndjson", std::ios::app) << dump(to_json(rollout)) << '\n';
}

Rollout rollout_from_log(std::istream& log) {
  std::string line;
  if (!std::getline(log, line)) log_error("empty");
  const Json header = parse_json(line, "event log header");
  if (!header.is_object() || !header.contains("config") || !header.contains("target")) {
    log_error("header needs config and target");
  }
  Game game(design_from_json(header["target"], "/target"), game_config_from_json(header["config"], "/config"));
  if (header.contains("meta")) game.meta() = header["meta"];
  std::optional<Message> pending;
  std::uint64_t expect = 0;
  std::size_t n = 1;
  while (std::getline(log, line)) {
    ++n;
    if (line.empty()) continue;
    const Event e = event_from_json(parse_json(line, "event log line " + std::to_string(n)),
                                    "event log line " + std::to_string(n));
    if (e.seq != expect++) log_error("sequence gap at line " + std::to_string(n));
    if (e.kind == "message_posted") {
      pending = message_from_json(e.payload.at("message"), "/payload/message");
    } else if (e.kind == "actions_applied") {
      if (!pending) log_error("actions without a message at line " + std::to_string(n));
      const auto actions = actions_from_json(e.payload.at("actions"), "/payload/actions");
      std::optional<double> duration;
      if (e.payload.contains("duration") && e.payload["duration"].is_number()) {
        duration = e.payload["duration"].get<double>();
      }
      game.step(*pending, actions, duration);
      pending.reset();
    } else if (e.kind == "finished") {
      return game.finalize(e.payload.value("submitted", false));
    }
  }
  log_error("session did not finish");
}

// Session

Session::Session(std::string id, SessionOptions opts, SessionManager& owner, std::vector<std::string> tokens,
                 Role first)
    : id_(std::move(id)),
      opts_(std::move(opts)),
      owner_(owner),
      tokens_(std::move(tokens)),
      first_role_(first),
      game_(opts_.target, opts_.config) {
  game_.meta() = {{"rollout_id", id_}, {"session_id", id_}, {"dyad", opts_.dyad}, {"condition", opts_.config.name}};
  last_tick_ = owner_.now();
  owner_.storage_->open_log(id_, {{"session", id_},
                                  {"config", to_json(opts_.config)},
                                  {"target", to_json(opts_.target)},
                                  {"meta", game_.meta()},
                                  {"reveal_distance", opts_.reveal_distance}});
}

Role Session::role_of(const std::string& token) const {
  auto it = joined_.find(token);
  if (it != joined_.end()) return it->second;
  throw Error(ErrorCode::BadToken, "token has not joined session " + id_);
}

void Session::charge_clock() {
  const double now = owner_.now();
  const double dt = std::max(0.0, now - last_tick_);
  last_tick_ = now;
  if (phase_ == Phase::designer_turn) {
    round_time_ += dt * opts_.config.designer_time_multiplier;
  } else if (phase_ == Phase::maker_turn) {
    round_time_ += dt;
  }
}

bool Session::timed_out() const { return game_.elapsed() + round_time_ >= opts_.config.total_time; }

void Session::emit(std::string kind, Json payload) {
  Event e{events_.size(), std::move(kind), std::move(payload)};
  owner_.storage_->append_event(id_, e);
  events_.push_back(std::move(e));
  cv_.notify_all();
}

Json Session::view_for(Role role) const {
  const int done = static_cast<int>(game_.rounds().size());
  const int round = phase_ == Phase::finished ? done : done + 1;
  Json history = Json::array();
  for (const auto& r : game_.rounds()) history.push_back(to_json(r));
  Json v{{"session", id_},
         {"role", to_string(role)},
         {"phase", to_string(phase_)},
         {"round", round},
         {"max_rounds", opts_.config.max_rounds},
         {"time_remaining", finite_or_null(opts_.config.total_time - game_.elapsed() - round_time_)},
         {"modality", to_string(opts_.config.modality)},
         {"char_limit", opts_.config.char_limit ? Json(*opts_.config.char_limit) : Json(nullptr)},
         {"threshold", dynamic_threshold(opts_.config, std::max(1, round))},
         {"current", to_json(game_.current())},
         {"history", std::move(history)},
         {"pending_message", pending_ ? to_json(*pending_) : Json(nullptr)},
         {"may_submit", may_submit_ && phase_ != Phase::finished}};
  if (!opts_.dyad.empty()) {
    if (const auto d = owner_.dyad(opts_.dyad)) v["lives"] = d->lives;
  }
  if (rollout_) v["outcome"] = to_string(rollout_->outcome);
  if (role == Role::designer) v["target"] = to_json(game_.target());
  return v;
}

Session::JoinResult Session::join(const std::string& token) {
  std::lock_guard lock(mu_);
  if (std::find(tokens_.begin(), tokens_.end(), token) == tokens_.end()) {
    throw Error(ErrorCode::BadToken, "unknown token for session " + id_);
  }
  auto it = joined_.find(token);
  Role role;
  if (it != joined_.end()) {
    role = it->second;
  } else {
    if (joined_.size() >= 2 || phase_ == Phase::finished) throw Error(ErrorCode::SessionFull, "session " + id_ + " is full");
    role = joined_.empty() ? first_role_ : other(joined_.begin()->second);
    joined_[token] = role;
    if (joined_.size() == 2 && phase_ == Phase::waiting) {
      phase_ = Phase::designer_turn;
      last_tick_ = owner_.now();
    }
    emit("joined", {{"role", to_string(role)}, {"phase", to_string(phase_)}});
  }
  last_seen_[role] = owner_.now();
  return {role, view_for(role), events_};
}

Json Session::view(const std::string& token) {
  std::lock_guard lock(mu_);
  const Role role = role_of(token);
  last_seen_[role] = owner_.now();
  charge_clock();
  return view_for(role);
}

void Session::touch(const std::string& token) {
  std::lock_guard lock(mu_);
  auto it = joined_.find(token);
  if (it != joined_.end()) last_seen_[it->second] = owner_.now();
}

Json Session::post_message(const std::string& token, const Message& message) {
  std::lock_guard lock(mu_);
  const Role role = role_of(token);
  last_seen_[role] = owner_.now();
  if (phase_ == Phase::finished) throw Error(ErrorCode::GameFinished, "session " + id_ + " has finished");
  if (role != Role::designer || phase_ != Phase::designer_turn) {
    throw Error(ErrorCode::NotYourTurn, std::string(to_string(role)) + " cannot post a message during " +
                                            std::string(to_string(phase_)));
  }
  charge_clock();
  if (timed_out()) {
    finish(false, "time");
    throw Error(ErrorCode::TimeExhausted, "the shared clock ran out");
  }
  game_.check_message(message);
  pending_ = message;
  may_submit_ = false;
  phase_ = Phase::maker_turn;
  const int round = static_cast<int>(game_.rounds().size()) + 1;
  emit("message_posted", {{"round", round}, {"message", to_json(message)}});
  return {{"accepted", true}, {"round", round}, {"phase", to_string(phase_)}};
}

Json Session::post_actions(const std::string& token, const std::vector<Action>& actions, bool submit) {
  std::lock_guard lock(mu_);
  const Role role = role_of(token);
  last_seen_[role] = owner_.now();
  if (phase_ == Phase::finished) throw Error(ErrorCode::GameFinished, "session " + id_ + " has finished");
  if (role != Role::maker || phase_ != Phase::maker_turn) {
    throw Error(ErrorCode::NotYourTurn, std::string(to_string(role)) + " cannot post actions during " +
                                            std::string(to_string(phase_)));
  }
  charge_clock();
  if (timed_out()) {
    finish(false, "time");
    throw Error(ErrorCode::TimeExhausted, "the shared clock ran out");
  }
  const double duration = round_time_;
  const StepResult step = game_.step(*pending_, actions, duration);
  round_time_ = 0.0;
  pending_.reset();
  Json payload{{"round", step.round},
               {"actions", actions_json(actions)},
               {"design", to_json(game_.current())},
               {"skipped", step.skipped},
               {"duration", duration}};
  if (opts_.reveal_distance) {
    payload["distance"] = step.distance;
    payload["threshold"] = step.threshold;
    payload["submittable"] = step.submittable;
  }
  phase_ = Phase::designer_turn;
  may_submit_ = true;
  emit("actions_applied", payload);
  Json out = payload;
  if (submit) out["submit"] = request_submit_locked();
  const bool last_round = step.round >= opts_.config.max_rounds;
  if (phase_ != Phase::finished && (last_round || timed_out())) {
    out["finished"] = finish(game_.submittable(), last_round ? "round_limit" : "time");
  }
  out["phase"] = to_string(phase_);
  return out;
}

Json Session::request_submit(const std::string& token) {
  std::lock_guard lock(mu_);
  const Role role = role_of(token);
  last_seen_[role] = owner_.now();
  if (phase_ == Phase::finished) throw Error(ErrorCode::GameFinished, "session " + id_ + " has finished");
  if (role != Role::maker || !may_submit_) {
    throw Error(ErrorCode::NotYourTurn, "submission is only open to the maker right after their edit");
  }
  Json out = request_submit_locked();
  out["phase"] = to_string(phase_);
  return out;
}

Json Session::request_submit_locked() {
  may_submit_ = false;
  const int round = static_cast<int>(game_.rounds().size());
  const bool ok = game_.submittable();
  Json payload{{"accepted", ok}, {"round", round}, {"threshold", dynamic_threshold(opts_.config, round)}};
  if (opts_.reveal_distance) payload["distance"] = game_.distance();
  emit("submit_result", payload);
  if (ok) payload["finished"] = finish(true, "submitted");
  return payload;
}

Json Session::finish(bool submitted, std::string reason) {
  rollout_ = game_.finalize(submitted);
  int lives = opts_.config.lives;
  if (!opts_.dyad.empty()) owner_.record_outcome(opts_.dyad, rollout_->outcome, lives);
  phase_ = Phase::finished;
  pending_.reset();
  may_submit_ = false;
  Json payload{{"outcome", to_string(rollout_->outcome)},
               {"reason", std::move(reason)},
               {"submitted", submitted},
               {"rounds", rollout_->rounds.size()},
               {"lives", lives}};
  if (opts_.reveal_distance) payload["distance"] = game_.distance();
  emit("finished", payload);
  owner_.storage_->append_rollout(*rollout_);
  return payload;
}

std::vector<Event> Session::events_since(std::uint64_t from, double timeout) {
  std::unique_lock lock(mu_);
  if (timeout > 0.0) {
    cv_.wait_for(lock, std::chrono::duration<double>(timeout),
                 [&] { return events_.size() > from || phase_ == Phase::finished; });
  }
  if (from >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

bool Session::tick() {
  std::lock_guard lock(mu_);
  if (phase_ == Phase::finished) return false;
  if (phase_ == Phase::waiting) return true;
  charge_clock();
  if (timed_out()) {
    emit("timer", {{"time_remaining", 0.0}});
    finish(false, "time");
    return false;
  }
  const double now = owner_.now();
  for (const auto& [role, seen] : last_seen_) {
    if (now - seen > owner_.settings().disconnect_grace) {
      finish(false, "disconnect:" + std::string(to_string(role)));
      return false;
    }
  }
  return true;
}

Phase Session::phase() const {
  std::lock_guard lock(mu_);
  return phase_;
}

std::optional<Rollout> Session::rollout() const {
  std::lock_guard lock(mu_);
  return rollout_;
}

// SessionManager

SessionManager::SessionManager(std::shared_ptr<Storage> storage, ServerSettings settings, ClockFn clock)
    : storage_(std::move(storage)), settings_(settings), clock_(std::move(clock)), rng_(settings.seed) {
  if (!storage_) storage_ = std::make_shared<MemoryStorage>();
  if (!clock_) {
    const auto start = std::chrono::steady_clock::now();
    clock_ = [start] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  }
}

void SessionManager::set_target_pool(std::vector<Design> pool) {
  std::lock_guard lock(mu_);
  pool_ = std::move(pool);
}

std::string SessionManager::random_hex(int bytes) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < bytes; ++i) {
    const auto b = static_cast<unsigned>(rng_() & 0xff);
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

std::shared_ptr<Session> SessionManager::create(SessionOptions opts) {
  opts.config.validate();
  std::lock_guard lock(mu_);
  if (opts.target.empty()) {
    opts.target = pool_.empty() ? smiley_face()
                                : pool_[std::uniform_int_distribution<std::size_t>(0, pool_.size() - 1)(rng_)];
  }
  if (!opts.dyad.empty()) {
    auto [it, fresh] = dyads_.try_emplace(opts.dyad, Dyad{opts.dyad, opts.config.lives});
    if (it->second.ejected()) throw Error(ErrorCode::DyadEjected, "dyad " + opts.dyad + " has no lives left");
  }
  std::string id = random_hex(6);
  while (sessions_.count(id)) id = random_hex(6);
  std::random_device rd;
  const auto token = [&] {
    std::string t;
    for (int i = 0; i < 4; ++i) {
      char buf[9];
      std::snprintf(buf, sizeof buf, "%08x", rd());
      t += buf;
    }
    return t;
  };
  std::vector<std::string> tokens{token(), token()};
  Role first;
  if (opts.first_role) {
    first = *opts.first_role;
  } else {
    first = (rng_() & 1) ? Role::maker : Role::designer;
  }
  std::shared_ptr<Session> s(new Session(id, std::move(opts), *this, std::move(tokens), first));
  sessions_[id] = s;
  return s;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::SessionNotFound, "no session " + id);
  return it->second;
}

int SessionManager::tick_all() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  int active = 0;
  for (const auto& s : all) active += s->tick();
  return active;
}

std::optional<Dyad> SessionManager::dyad(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = dyads_.find(id);
  if (it == dyads_.end()) return std::nullopt;
  return it->second;
}

void SessionManager::record_outcome(const std::string& dyad, Outcome outcome, int& lives_left) {
  std::lock_guard lock(mu_);
  auto& d = dyads_[dyad];
  d.record(outcome);
  lives_left = d.lives;
}

SessionOptions session_options_from_json(const Json& body) {
  if (!body.is_object()) throw Error(ErrorCode::SchemaError, "/: expected an object");
  for (const auto& [k, v] : body.items()) {
    if (k != "preset" && k != "config" && k != "target" && k != "dyad" && k != "first_role" &&
        k != "reveal_distance") {
      throw Error(ErrorCode::SchemaError, "/" + k + ": unknown key");
    }
  }
  SessionOptions o;
  if (body.contains("config")) {
    Json cfg = body["config"];
    if (body.contains("preset") && cfg.is_object() && !cfg.contains("preset")) cfg["preset"] = body["preset"];
    o.config = game_config_from_json(cfg, "/config");
  } else if (body.contains("preset")) {
    if (!body["preset"].is_string()) throw Error(ErrorCode::SchemaError, "/preset: expected a string");
    try {
      o.config = condition_preset(body["preset"].get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("/preset: ") + e.what());
    }
  }
  if (body.contains("target")) {
    const Json& t = body["target"];
    if (t.is_string() && t.get<std::string>() == "smiley") {
      o.target = smiley_face();
    } else {
      o.target = design_from_json(t, "/target");
    }
  }
  if (body.contains("dyad")) {
    if (!body["dyad"].is_string()) throw Error(ErrorCode::SchemaError, "/dyad: expected a string");
    o.dyad = body["dyad"].get<std::string>();
  }
  if (body.contains("first_role")) {
    const auto r = body["first_role"].is_string() ? role_from_string(body["first_role"].get<std::string>())
                                                  : std::nullopt;
    if (!r) throw Error(ErrorCode::SchemaError, "/first_role: expected \"designer\" or \"maker\"");
    o.first_role = r;
  }
  if (body.contains("reveal_distance")) {
    if (!body["reveal_distance"].is_boolean()) throw Error(ErrorCode::SchemaError, "/reveal_distance: expected a boolean");
    o.reveal_distance = body["reveal_distance"].get<bool>();
  }
  return o;
}

// HTTP

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SessionNotFound: return 404;
    case ErrorCode::BadToken:
    case ErrorCode::DyadEjected: return 403;
    case ErrorCode::SessionFull:
    case ErrorCode::NotYourTurn:
    case ErrorCode::GameFinished: return 409;
    case ErrorCode::SchemaError:
    case ErrorCode::ParseError:
    case ErrorCode::UnsupportedCommand:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownPreset: return 400;
    default: return 422;
  }
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(dump(body), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    reply(res, 200, f());
  } catch (const Error& e) {
    reply(res, status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
  }
}

std::string token_of(const Json& body) {
  if (!body.is_object() || !body.contains("token") || !body["token"].is_string()) {
    throw Error(ErrorCode::BadToken, "missing token");
  }
  return body["token"].get<std::string>();
}

}  // namespace

HttpServer::HttpServer(SessionManager& manager) : manager_(manager), http_(std::make_unique<httplib::Server>()) {
  http_->Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = req.body.empty() ? Json::object() : parse_json(req.body, "request body");
      auto s = manager_.create(session_options_from_json(body));
      return Json{{"session", s->id()}, {"tokens", s->tokens()}};
    });
  });
  http_->Post(R"(/sessions/([^/]+)/join)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = manager_.get(req.matches[1]);
      auto r = s->join(token_of(parse_json(req.body, "request body")));
      Json events = Json::array();
      for (const auto& e : r.events) events.push_back(to_json(e));
      return Json{{"role", to_string(r.role)}, {"view", std::move(r.view)}, {"events", std::move(events)}};
    });
  });
  http_->Get(R"(/sessions/([^/]+)/view)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return manager_.get(req.matches[1])->view(req.get_param_value("token")); });
  });
  http_->Post(R"(/sessions/([^/]+)/message)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_json(req.body, "request body");
      auto s = manager_.get(req.matches[1]);
      const std::string token = token_of(body);
      if (!body.contains("message")) throw Error(ErrorCode::SchemaError, "/message: missing");
      return s->post_message(token, message_from_json(body["message"], "/message"));
    });
  });
  http_->Post(R"(/sessions/([^/]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_json(req.body, "request body");
      auto s = manager_.get(req.matches[1]);
      const std::string token = token_of(body);
      const auto actions = actions_from_json(body.value("actions", Json::array()), "/actions");
      const bool submit = body.value("submit", false);
      return s->post_actions(token, actions, submit);
    });
  });
  http_->Post(R"(/sessions/([^/]+)/submit)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = manager_.get(req.matches[1]);
      return s->request_submit(token_of(parse_json(req.body, "request body")));
    });
  });
  http_->Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Session> s;
    std::string token = req.get_param_value("token");
    try {
      s = manager_.get(req.matches[1]);
      s->view(token);
    } catch (const Error& e) {
      reply(res, status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
      return;
    }
    std::uint64_t from = 0;
    const std::string since = req.has_param("since") ? req.get_param_value("since") : req.get_header_value("Last-Event-ID");
    if (!since.empty()) {
      try {
        from = std::stoull(since) + (req.has_param("since") ? 0 : 1);
      } catch (const std::exception&) {
      }
    }
    auto next = std::make_shared<std::uint64_t>(from);
    const double heartbeat = manager_.settings().heartbeat;
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, s, token, next, heartbeat](std::size_t, httplib::DataSink& sink) {
          if (stopping_) {
            sink.done();
            return true;
          }
          const auto events = s->events_since(*next, heartbeat);
          s->touch(token);
          std::string out;
          for (const auto& e : events) {
            out += "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + dump(to_json(e)) + "\n\n";
            *next = e.seq + 1;
          }
          if (out.empty()) out = ": heartbeat\n\n";
          if (!sink.write(out.data(), out.size())) return false;
          if (s->phase() == Phase::finished && s->events_since(*next).empty()) sink.done();
          return true;
        });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(ErrorCode::InvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() {
  heartbeat_ = std::thread([this] {
    std::unique_lock lock(hb_mu_);
    while (!stopping_) {
      hb_cv_.wait_for(lock, std::chrono::duration<double>(manager_.settings().heartbeat));
      if (stopping_) break;
      lock.unlock();
      manager_.tick_all();
      lock.lock();
    }
  });
  http_->listen_after_bind();
}

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  worker_ = std::thread([this] { listen(); });
  http_->wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  {
    std::lock_guard lock(hb_mu_);
    if (stopping_.exchange(true)) return;
  }
  hb_cv_.notify_all();
  http_->stop();
  if (worker_.joinable()) worker_.join();
  if (heartbeat_.joinable()) heartbeat_.join();
}

}  // namespace mrcad
