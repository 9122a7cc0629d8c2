// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "mrcad/error.hpp"
#include "mrcad/game.hpp"
#include "support/generators.hpp"

using namespace mrcad;
using doctest::Approx;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mrcad::Error");
  return ErrorCode::SchemaError;
}

const Message kSay{"go", {}};
const Design kTarget = Design::from_curves({Curve::line({0, 0}, {9, 0})});

std::vector<Action> rebuild(const Design& from, const Design& to) {
  std::vector<Action> out;
  for (const auto& c : from.curves()) out.push_back(RemoveCurve{c});
  for (const auto& c : to.curves()) out.push_back(MakeCurve{c});
  return out;
}

struct Talker : DesignerAgent {
  std::vector<DesignerView> seen;
  Message produce_message(const DesignerView& view) override {
    seen.push_back(view);
    return kSay;
  }
};

struct Copier : MakerAgent {
  std::vector<Action> propose_actions(const MakerInput& in) override {
    return rebuild(in.current, *in.privileged_target);
  }
  bool privileged() const override { return true; }
  std::string name() const override { return "copier"; }
};

struct Idle : MakerAgent {
  bool saw_target = false;
  std::vector<Action> propose_actions(const MakerInput& in) override {
    saw_target = saw_target || in.privileged_target != nullptr;
    return {};
  }
  std::string name() const override { return "idle"; }
};

// Adds up to k missing target curves per round.
struct Greedy : MakerAgent {
  int k;
  explicit Greedy(int k) : k(k) {}
  std::vector<Action> propose_actions(const MakerInput& in) override {
    std::vector<Action> out;
    for (const auto& c : in.privileged_target->curves()) {
      bool have = false;
      for (const auto& e : in.current.curves()) have = have || same_curve(c, e, kIdentityEps);
      if (!have && static_cast<int>(out.size()) < k) out.push_back(MakeCurve{c});
    }
    return out;
  }
  bool privileged() const override { return true; }
  std::string name() const override { return "greedy"; }
};

struct Broken : MakerAgent {
  std::vector<Action> propose_actions(const MakerInput&) override { throw std::runtime_error("boom"); }
  std::string name() const override { return "broken"; }
};

}  // namespace

TEST_CASE("dynamic_threshold default schedule") {
  GameConfig cfg;
  CHECK(dynamic_threshold(cfg, 1) == 0.05);
  CHECK(dynamic_threshold(cfg, 10) == Approx(0.2).epsilon(1e-15));
  CHECK(dynamic_threshold(cfg, 5) == Approx(0.05 + 4.0 / 9.0 * 0.15).epsilon(1e-12));
  for (int r = 1; r < 10; ++r) CHECK(dynamic_threshold(cfg, r) <= dynamic_threshold(cfg, r + 1));

  cfg.submission_schedule = {0.1, 0.15, 0.2};
  cfg.max_rounds = 3;
  CHECK(dynamic_threshold(cfg, 2) == 0.15);
  cfg.submission_schedule = {0.2, 0.1, 0.3};
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("step: exact reconstruction is submittable at round 1") {
  Game g(kTarget, GameConfig{});
  const auto acts = rebuild(Design{}, kTarget);
  const StepResult r = g.step(kSay, acts);
  CHECK(r.distance == 0.0);
  CHECK(r.submittable);
  CHECK(g.finalize(true).outcome == Outcome::won);
}

TEST_CASE("step: the threshold loosens in later rounds") {
  // The parallel line 4.2 units away scores 4.2/40 = 0.105: above theta_4 = 0.1,
  // below theta_5.
  Game g(kTarget, GameConfig{});
  const StepResult r1 = g.step(kSay, std::vector<Action>{MakeCurve{Curve::line({0, 4.2}, {9, 4.2})}});
  CHECK(r1.distance == Approx(0.105).epsilon(1e-12));
  CHECK_FALSE(r1.submittable);
  for (int i = 2; i <= 4; ++i) CHECK_FALSE(g.step(kSay, {}).submittable);
  const StepResult r5 = g.step(kSay, {});
  CHECK(r5.round == 5);
  CHECK(r5.submittable);
}

TEST_CASE("step: the empty design is never submittable") {
  Game g(kTarget, GameConfig{});
  const StepResult r = g.step(kSay, {});
  CHECK(r.distance == Approx(0.125));
  CHECK_FALSE(r.submittable);
  CHECK(g.finalize(true).outcome == Outcome::lost);
}

TEST_CASE("step: message preconditions") {
  Game text_only(kTarget, condition_preset("text_refine"));
  const Message drawing{"", Drawing{{Stroke{{{0, 0}, {1, 1}}}}}};
  CHECK(code_of([&] { text_only.step(drawing, {}); }) == ErrorCode::ModalityViolation);
  Game draw_only(kTarget, condition_preset("draw_refine"));
  CHECK(code_of([&] { draw_only.step(kSay, {}); }) == ErrorCode::ModalityViolation);
  CHECK(code_of([&] { text_only.step(Message{}, {}); }) == ErrorCode::EmptyMessage);
  CHECK(code_of([&] { text_only.step(Message{std::string(201, 'a'), {}}, {}); }) == ErrorCode::CharLimitExceeded);
  // Limits count characters, not bytes.
  std::string accents;
  for (int i = 0; i < 200; ++i) accents += "\xC3\xA9";
  CHECK_NOTHROW(text_only.check_message(Message{accents, {}}));

  Game one(kTarget, condition_preset("mm_genonly"));
  one.step(kSay, {});
  CHECK(code_of([&] { one.step(kSay, {}); }) == ErrorCode::RoundLimitExceeded);

  Game timed(kTarget, condition_preset("dataset"));
  timed.spend_time(540);
  CHECK(code_of([&] { timed.step(kSay, {}); }) == ErrorCode::TimeExhausted);
}

TEST_CASE("finalize and lives") {
  Dyad dyad{"d1", 3};
  Game g(kTarget, GameConfig{});
  g.step(kSay, std::vector<Action>{MakeCurve{Curve::line({0, 12}, {9, 12})}});
  CHECK(g.finalize(false, &dyad).outcome == Outcome::lost);
  CHECK(dyad.lives == 2);
  CHECK(code_of([&] { g.finalize(false); }) == ErrorCode::GameFinished);
  dyad.record(Outcome::lost);
  CHECK_FALSE(dyad.ejected());
  dyad.record(Outcome::lost);
  CHECK(dyad.ejected());
  Dyad winner{"d2", 3};
  winner.record(Outcome::won);
  CHECK(winner.lives == 3);
}

TEST_CASE("condition presets") {
  CHECK(condition_preset("mm_genonly").max_rounds == 1);
  CHECK(condition_preset("text_refine").modality == ChannelRule::text_only);
  const GameConfig ds = condition_preset("dataset");
  CHECK(ds.max_rounds == 10);
  CHECK(ds.total_time == 540);
  CHECK_FALSE(ds.char_limit.has_value());
  CHECK(ds.designer_time_multiplier == 2.0);
  const GameConfig mm = condition_preset("mm_refine");
  CHECK(mm.max_rounds == 3);
  CHECK(mm.designer_time == 30.0);
  CHECK(mm.maker_time == 120.0);
  CHECK(mm.char_limit == 200);
  CHECK(code_of([] { condition_preset("speedrun"); }) == ErrorCode::UnknownPreset);
  // One-round games use the win threshold directly.
  CHECK(dynamic_threshold(condition_preset("mm_genonly"), 1) == 0.2);
}

TEST_CASE("play: oracle wins at round 1, idle maker loses") {
  Talker talker;
  Copier copier;
  const Rollout won = play(smiley_face(), talker, copier, condition_preset("dataset"));
  CHECK(won.outcome == Outcome::won);
  CHECK(won.rounds.size() == 1);
  CHECK(chamfer(won.rounds.back().design_after, smiley_face()) == 0.0);
  REQUIRE(talker.seen.size() == 1);
  CHECK(talker.seen[0].target_render.find("<circle") != std::string::npos);

  Idle idle;
  const Rollout lost = play(smiley_face(), talker, idle, condition_preset("dataset"));
  CHECK(lost.outcome == Outcome::lost);
  CHECK(lost.rounds.size() == 10);
  CHECK_FALSE(idle.saw_target);
}

TEST_CASE("play: greedy maker wins at ceil(m/k)") {
  testing::Rng rng(3);
  Talker talker;
  for (int trial = 0; trial < 10; ++trial) {
    const Design target = testing::random_design(rng, 4, 7);
    Greedy greedy(2);
    const Rollout r = play(target, talker, greedy, condition_preset("dataset"));
    CHECK(r.outcome == Outcome::won);
    const auto m = static_cast<int>(target.size());
    CHECK(static_cast<int>(r.rounds.size()) <= (m + 1) / 2);
    for (std::size_t i = 1; i < r.rounds.size(); ++i) {
      CHECK(design_equal(r.rounds[i].design_before, r.rounds[i - 1].design_after, 0.0));
    }
    for (const auto& round : r.rounds) {
      const auto replay = apply_all(round.design_before, round.actions, ApplyMode::lenient);
      CHECK(design_equal(replay.design, round.design_after, 0.0));
    }
  }
}

TEST_CASE("play: agent failures carry the round") {
  Talker talker;
  Broken broken;
  try {
    play(kTarget, talker, broken, GameConfig{});
    FAIL("expected AgentError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AgentError);
    CHECK(std::string(e.what()).find("round 1") != std::string::npos);
  }
}

TEST_CASE("smiley face fixture") {
  const Design s = smiley_face();
  CHECK(s.size() == 4);
  int circles = 0, arcs = 0;
  for (const auto& c : s.curves()) {
    circles += c.kind == CurveKind::circle;
    arcs += c.kind == CurveKind::arc;
  }
  CHECK(circles == 3);  // outline and both eyes
  CHECK(arcs == 1);
}
