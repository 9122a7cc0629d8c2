// SPDX-License-Identifier: Apache-2.0

#include "mrcad/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrcad/error.hpp"
#include "mrcad/render.hpp"

namespace mrcad {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::won:
      return "won";
    case Outcome::lost:
      return "lost";
    case Outcome::excluded:
      return "excluded";
  }
  return "?";
}

std::optional<Outcome> outcome_from_string(std::string_view s) {
  if (s == "won") return Outcome::won;
  if (s == "lost") return Outcome::lost;
  if (s == "excluded") return Outcome::excluded;
  return std::nullopt;
}

std::string_view to_string(ChannelRule r) {
  switch (r) {
    case ChannelRule::multimodal:
      return "multimodal";
    case ChannelRule::text_only:
      return "text_only";
    case ChannelRule::drawing_only:
      return "drawing_only";
  }
  return "?";
}

void GameConfig::validate() const {
  metric.validate();
  if (max_rounds < 1) throw Error(ErrorCode::InvalidConfig, "max_rounds must be >= 1");
  if (!(total_time > 0)) throw Error(ErrorCode::InvalidConfig, "total_time must be positive");
  if (!(win_threshold > 0)) throw Error(ErrorCode::InvalidConfig, "win_threshold must be positive");
  if (lives < 1) throw Error(ErrorCode::InvalidConfig, "lives must be >= 1");
  if (char_limit && *char_limit < 0) throw Error(ErrorCode::InvalidConfig, "char_limit must be >= 0");
  if (!(designer_time_multiplier > 0)) throw Error(ErrorCode::InvalidConfig, "designer_time_multiplier must be positive");
  if (!submission_schedule.empty()) {
    if (static_cast<int>(submission_schedule.size()) < max_rounds) {
      throw Error(ErrorCode::InvalidConfig, "submission_schedule needs one threshold per round");
    }
    for (std::size_t i = 0; i < submission_schedule.size(); ++i) {
      if (!(submission_schedule[i] > 0)) throw Error(ErrorCode::InvalidConfig, "thresholds must be positive");
      if (i > 0 && submission_schedule[i] < submission_schedule[i - 1]) {
        throw Error(ErrorCode::InvalidConfig, "submission_schedule must be nondecreasing");
      }
    }
  }
}

double dynamic_threshold(const GameConfig& cfg, int round) {
  if (round < 1 || round > cfg.max_rounds) {
    throw Error(ErrorCode::RoundLimitExceeded, "round " + std::to_string(round) + " outside 1.." +
                                                   std::to_string(cfg.max_rounds));
  }
  if (!cfg.submission_schedule.empty()) return cfg.submission_schedule[static_cast<std::size_t>(round - 1)];
  if (cfg.max_rounds == 1) return cfg.win_threshold;
  const double t = static_cast<double>(round - 1) / (cfg.max_rounds - 1);
  return kFirstRoundThreshold + t * (cfg.win_threshold - kFirstRoundThreshold);
}

GameConfig condition_preset(std::string_view name) {
  GameConfig cfg;
  cfg.name = std::string(name);
  const auto study = [&](ChannelRule rule) {
    cfg.max_rounds = 3;
    cfg.designer_time = 30.0;
    cfg.maker_time = 120.0;
    cfg.char_limit = 200;
    cfg.modality = rule;
    cfg.total_time = std::numeric_limits<double>::infinity();
  };
  if (name == "mm_refine") {
    study(ChannelRule::multimodal);
  } else if (name == "text_refine") {
    study(ChannelRule::text_only);
  } else if (name == "draw_refine") {
    study(ChannelRule::drawing_only);
  } else if (name == "mm_genonly") {
    cfg.max_rounds = 1;
    cfg.designer_time = 90.0;
    cfg.maker_time = 360.0;
    cfg.char_limit = 600;
    cfg.total_time = std::numeric_limits<double>::infinity();
  } else if (name == "dataset") {
    cfg.max_rounds = 10;
    cfg.total_time = 540.0;
    cfg.designer_time_multiplier = 2.0;
  } else {
    throw Error(ErrorCode::UnknownPreset, "unknown condition preset '" + std::string(name) + "'");
  }
  return cfg;
}

void Dyad::record(Outcome outcome) {
  if (outcome == Outcome::lost && lives > 0) --lives;
}

Game::Game(Design target, GameConfig cfg) : target_(std::move(target)), cfg_(std::move(cfg)) { cfg_.validate(); }

void Game::check_message(const Message& message) const {
  if (finished_) throw Error(ErrorCode::GameFinished, "game already finished");
  if (static_cast<int>(rounds_.size()) >= cfg_.max_rounds) {
    throw Error(ErrorCode::RoundLimitExceeded, "all " + std::to_string(cfg_.max_rounds) + " rounds used");
  }
  if (elapsed_ >= cfg_.total_time) throw Error(ErrorCode::TimeExhausted, "time budget exhausted");
  if (message.empty()) throw Error(ErrorCode::EmptyMessage, "message has neither text nor drawing");
  if (cfg_.modality == ChannelRule::text_only && message.has_drawing()) {
    throw Error(ErrorCode::ModalityViolation, "this condition allows text only");
  }
  if (cfg_.modality == ChannelRule::drawing_only && message.has_text()) {
    throw Error(ErrorCode::ModalityViolation, "this condition allows drawing only");
  }
  if (cfg_.char_limit && static_cast<int>(utf8_length(message.text)) > *cfg_.char_limit) {
    throw Error(ErrorCode::CharLimitExceeded, "text exceeds " + std::to_string(*cfg_.char_limit) + " characters");
  }
  validate_drawing(message.drawing);
}

StepResult Game::step(const Message& message, std::span<const Action> actions, std::optional<double> duration) {
  check_message(message);
  auto applied = apply_all(current_, actions, ApplyMode::lenient);
  rounds_.push_back({current_, message, {actions.begin(), actions.end()}, applied.design, duration});
  current_ = std::move(applied.design);
  if (duration) elapsed_ += *duration;

  StepResult r;
  r.round = static_cast<int>(rounds_.size());
  r.distance = distance();
  r.threshold = dynamic_threshold(cfg_, r.round);
  r.submittable = submittable();
  r.skipped = std::move(applied.skipped);
  return r;
}

double Game::distance() const { return chamfer(current_, target_, cfg_.metric); }

bool Game::submittable() const {
  if (rounds_.empty()) return false;
  const bool acted = std::any_of(rounds_.begin(), rounds_.end(), [](const Round& r) { return !r.actions.empty(); });
  return acted && distance() < dynamic_threshold(cfg_, static_cast<int>(rounds_.size()));
}

Rollout Game::finalize(bool submitted, Dyad* dyad) {
  if (finished_) throw Error(ErrorCode::GameFinished, "game already finished");
  finished_ = true;
  const bool acted = std::any_of(rounds_.begin(), rounds_.end(), [](const Round& r) { return !r.actions.empty(); });
  Rollout out;
  out.target = target_;
  out.rounds = rounds_;
  out.outcome = submitted && acted && distance() < cfg_.win_threshold ? Outcome::won : Outcome::lost;
  out.meta = meta_;
  if (dyad) dyad->record(out.outcome);
  return out;
}

Rollout play(const Design& target, DesignerAgent& designer, MakerAgent& maker, const GameConfig& cfg,
             const PlayOptions& opts) {
  Game game(target, cfg);
  game.meta() = opts.meta;
  const std::string target_svg = scene_to_svg({target, {}, {}});
  for (int round = 1; round <= cfg.max_rounds && game.time_remaining() > 0; ++round) {
    DesignerView view;
    view.round = round;
    view.target_render = target_svg;
    view.current_render = scene_to_svg({game.current(), {}, {}});
    for (const auto& panel : render_history(game.rounds())) {
      view.history_renders.push_back(scene_to_svg(panel.before));
      view.history_renders.push_back(scene_to_svg(panel.after));
    }
    Message message;
    try {
      message = designer.produce_message(view);
      game.check_message(message);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::AgentError, "designer failed in round " + std::to_string(round) + ": " + e.what());
    }
    std::vector<Action> actions;
    try {
      MakerInput input{message, game.current(), game.rounds(), round, opts.seed + static_cast<std::uint64_t>(round)};
      if (maker.privileged()) input.privileged_target = &target;
      actions = maker.propose_actions(input);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::AgentError, "maker failed in round " + std::to_string(round) + ": " + e.what());
    }
    if (game.step(message, actions).submittable) return game.finalize(true);
  }
  return game.finalize(false);
}

Design smiley_face() {
  return Design::from_curves({
      Curve::circle({0, -15}, {0, 15}),
      Curve::circle({-6, 4}, {-4, 4}),
      Curve::circle({4, 4}, {6, 4}),
      Curve::arc({-8, -4}, {0, -9}, {8, -4}),
  });
}

}  // namespace mrcad
