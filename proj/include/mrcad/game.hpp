// SPDX-License-Identifier: Apache-2.0

// The Designer/Maker game: rounds, rollouts, submission thresholds, lives and
// the play loop over abstract agents.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mrcad/cad.hpp"
#include "mrcad/message.hpp"
#include "mrcad/metric.hpp"

namespace mrcad {

struct Round {
  Design design_before;
  Message message;
  std::vector<Action> actions;
  Design design_after;
  std::optional<double> duration;
};

enum class Outcome { won, lost, excluded };
std::string_view to_string(Outcome o);
std::optional<Outcome> outcome_from_string(std::string_view s);

struct Rollout {
  Design target;
  std::vector<Round> rounds;
  Outcome outcome = Outcome::lost;
  /// Free-form metadata (dyad id, condition, rollout id, timestamps); kept
  /// verbatim through load/save.
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

/// Which channels a message may use under a condition.
enum class ChannelRule { multimodal, text_only, drawing_only };
std::string_view to_string(ChannelRule r);

struct GameConfig {
  std::string name = "custom";
  int max_rounds = 10;
  /// Shared clock in seconds.
  double total_time = 540.0;
  double win_threshold = 0.2;
  /// Per-round submission thresholds; empty means the default linear schedule.
  std::vector<double> submission_schedule;
  int lives = 3;
  ChannelRule modality = ChannelRule::multimodal;
  std::optional<int> char_limit;
  std::optional<double> designer_time;
  std::optional<double> maker_time;
  /// Designer time counts this many times against the shared clock.
  double designer_time_multiplier = 1.0;
  MetricConfig metric;

  /// Throws InvalidConfig.
  void validate() const;
};

/// First entry of the default submission schedule.
inline constexpr double kFirstRoundThreshold = 0.05;

/// theta_r for a 1-based round: the configured schedule, or linear from 0.05
/// at round 1 to win_threshold at max_rounds.
double dynamic_threshold(const GameConfig& cfg, int round);

/// mm_refine, text_refine, draw_refine, mm_genonly, dataset. Throws UnknownPreset.
GameConfig condition_preset(std::string_view name);

/// Lives shared by a dyad across games.
struct Dyad {
  std::string id;
  int lives = 3;

  bool ejected() const { return lives <= 0; }
  /// Decrements lives on a loss.
  void record(Outcome outcome);
};

struct StepResult {
  int round = 0;
  double distance = 0.0;
  double threshold = 0.0;
  bool submittable = false;
  std::vector<std::size_t> skipped;
};

/// A rollout in progress. Single owner; step and finalize are the only mutators.
class Game {
 public:
  Game(Design target, GameConfig cfg);

  /// Throws EmptyMessage, ModalityViolation, CharLimitExceeded,
  /// RoundLimitExceeded, TimeExhausted or GameFinished.
  void check_message(const Message& message) const;

  /// Appends one round (actions applied leniently) and scores it.
  StepResult step(const Message& message, std::span<const Action> actions, std::optional<double> duration = {});

  /// Adds to the shared clock without completing a round (server time keeping).
  void spend_time(double seconds) { elapsed_ += seconds; }

  /// Ends the game. Won iff submitted, the final design is within the win
  /// threshold and at least one round carried actions.
  Rollout finalize(bool submitted, Dyad* dyad = nullptr);

  const Design& target() const { return target_; }
  const Design& current() const { return current_; }
  const GameConfig& config() const { return cfg_; }
  const std::vector<Round>& rounds() const { return rounds_; }
  bool finished() const { return finished_; }
  double elapsed() const { return elapsed_; }
  double time_remaining() const { return cfg_.total_time - elapsed_; }
  /// Last scored distance; chamfer(current, target).
  double distance() const;
  bool submittable() const;
  nlohmann::ordered_json& meta() { return meta_; }

 private:
  Design target_;
  GameConfig cfg_;
  Design current_;
  std::vector<Round> rounds_;
  double elapsed_ = 0.0;
  bool finished_ = false;
  nlohmann::ordered_json meta_ = nlohmann::ordered_json::object();
};

/// What the Designer gets to see: renders only (SVG documents).
struct DesignerView {
  int round = 1;
  std::string target_render;
  std::string current_render;
  std::vector<std::string> history_renders;
};

class DesignerAgent {
 public:
  virtual ~DesignerAgent() = default;
  virtual Message produce_message(const DesignerView& view) = 0;
};

/// What the Maker gets to see. Privileged fields are filled only for agents
/// that declare themselves privileged (calibration baselines).
struct MakerInput {
  const Message& message;
  const Design& current;
  std::span<const Round> history;
  int round = 1;
  std::uint64_t seed = 0;
  const Design* privileged_target = nullptr;
  std::span<const Action> privileged_reference_actions = {};
};

class MakerAgent {
 public:
  virtual ~MakerAgent() = default;
  virtual std::vector<Action> propose_actions(const MakerInput& input) = 0;
  virtual bool privileged() const { return false; }
  virtual std::string name() const = 0;
};

struct PlayOptions {
  std::uint64_t seed = 0;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

/// designer -> maker -> step until a submittable round (submitted right away),
/// the round limit or the time budget. Agent failures become AgentError
/// carrying the round index.
Rollout play(const Design& target, DesignerAgent& designer, MakerAgent& maker, const GameConfig& cfg,
             const PlayOptions& opts = {});

/// The practice target: face outline, two eyes and a smile.
Design smiley_face();

}  // namespace mrcad
