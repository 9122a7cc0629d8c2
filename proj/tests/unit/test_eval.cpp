// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>

#include "mrcad/error.hpp"
#include "mrcad/eval.hpp"

using namespace mrcad;

namespace {

std::vector<DatasetRecord> corpus(std::uint64_t seed, int designs, int wins, int losses, int rounds) {
  std::mt19937_64 rng(seed);
  std::vector<DatasetRecord> out;
  std::set<std::string> seen;
  int id = 0;
  for (int d = 0; d < designs; ++d) {
    Design target = synthetic_design(rng, {std::max(rounds, 3), 6, 9});
    while (!seen.insert(design_id(target)).second) target = synthetic_design(rng, {std::max(rounds, 3), 6, 9});
    for (int k = 0; k < wins + losses; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "r%03d", id++);
      out.push_back(make_record(synthetic_rollout(target, rounds, k < wins, buf)));
    }
  }
  return out;
}

struct Spy : MakerAgent {
  std::mutex mu;
  int calls = 0, saw_text = 0, saw_drawing = 0, saw_history_text = 0, saw_history_drawing = 0;
  std::vector<Action> propose_actions(const MakerInput& in) override {
    std::lock_guard lock(mu);
    ++calls;
    saw_text += in.message.has_text();
    saw_drawing += in.message.has_drawing();
    for (const auto& r : in.history) {
      saw_history_text += r.message.has_text();
      saw_history_drawing += r.message.has_drawing();
    }
    return {};
  }
  std::string name() const override { return "spy"; }
};

// Takes away one curve the design shares with the target.
struct Spoiler : MakerAgent {
  std::vector<Action> propose_actions(const MakerInput& in) override {
    for (const auto& c : in.current.curves()) {
      for (const auto& t : in.privileged_target->curves()) {
        if (same_curve(c, t, kIdentityEps)) return {RemoveCurve{c}};
      }
    }
    return {};
  }
  bool privileged() const override { return true; }
  std::string name() const override { return "spoiler"; }
};

struct Thrower : MakerAgent {
  std::vector<Action> propose_actions(const MakerInput&) override { throw std::runtime_error("no"); }
  std::string name() const override { return "thrower"; }
};

EvalItem item_with(Design current, Design target) {
  EvalItem it;
  it.rollout_id = "x";
  it.current = std::move(current);
  it.target = std::move(target);
  return it;
}

}  // namespace

TEST_CASE("proportional_improvement arithmetic") {
  // Target: line y=0. Current: parallel line 4 units up (0.10); 2.4 up is 0.06; 4.8 up is 0.12.
  const Design target = Design::from_curves({Curve::line({0, 0}, {9, 0})});
  const Curve cur = Curve::line({0, 4}, {9, 4});
  const EvalItem it = item_with(Design::from_curves({cur}), target);
  CHECK(proportional_improvement({}, it) == 0.0);
  const std::vector<Action> exact{RemoveCurve{cur}, MakeCurve{Curve::line({0, 0}, {9, 0})}};
  CHECK(proportional_improvement(exact, it) == 1.0);
  const std::vector<Action> closer{MoveCurve{cur, {0, -1.6}}};
  CHECK(proportional_improvement(closer, it) == doctest::Approx(0.4).epsilon(1e-12));
  const std::vector<Action> worse{MoveCurve{cur, {0, 0.8}}};
  CHECK(proportional_improvement(worse, it) == doctest::Approx(-0.2).epsilon(1e-12));

  try {
    proportional_improvement({}, item_with(target, target));
    FAIL("expected ZeroBaseline");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroBaseline);
  }
}

TEST_CASE("PI cancels the normalization constant") {
  const Design target = Design::from_curves({Curve::line({0, 0}, {9, 0}), Curve::circle({-3, 3}, {3, 3})});
  const Curve cur = Curve::line({0, 1}, {9, 2});
  const EvalItem it = item_with(Design::from_curves({cur}), target);
  const std::vector<Action> acts{MovePoint{{0, 1}, {0, 0.5}}};
  MetricConfig wide;
  wide.canvas_extent = 400;
  wide.cap = 0.025;
  CHECK(std::abs(proportional_improvement(acts, it) - proportional_improvement(acts, it, wide)) <= 1e-12);
}

TEST_CASE("build_benchmark item counts") {
  const auto recs = corpus(4, 4, 3, 0, 2);
  const auto items = build_benchmark(recs);
  CHECK(items.size() == 24);
  int gen = 0;
  for (const auto& it : items) gen += it.generation();
  CHECK(gen == 12);
  for (std::size_t i = 1; i < items.size(); ++i) {
    if (items[i].rollout_id == items[i - 1].rollout_id) CHECK(items[i].round_index == items[i - 1].round_index + 1);
  }
  CHECK(build_benchmark(corpus(5, 3, 2, 2, 2)).empty());

  // Unsuccessful rollouts of qualifying designs join only on request.
  const auto mixed = corpus(6, 2, 3, 1, 2);
  CHECK(build_benchmark(mixed).size() == 12);
  CHECK(build_benchmark(mixed, {}, {false}).size() == 16);
}

TEST_CASE("calibration baselines") {
  const auto items = build_benchmark(corpus(9, 5, 3, 0, 3));
  REQUIRE_FALSE(items.empty());
  NoopMaker noop;
  OracleMaker oracle;
  const auto n = evaluate(noop, items);
  const auto o = evaluate(oracle, items);
  CHECK(n.generation.mean_pi == 0.0);
  CHECK(n.refinement.mean_pi == 0.0);
  CHECK(o.generation.mean_pi == 1.0);
  CHECK(o.refinement.mean_pi == 1.0);
  for (const auto& r : n.items) CHECK(r.pi == 0.0);

  HumanReplayMaker human;
  const auto h = evaluate(human, items);
  CHECK(h.refinement.mean_pi > 0.0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(h.items[i].pi == proportional_improvement(items[i].human_actions, items[i]));
  }

  GreedyMaker greedy(1);
  const auto g = evaluate(greedy, items);
  CHECK(g.overall.mean_pi > 0.0);
  CHECK(g.overall.mean_pi < 1.0);

  Spoiler spoiler;
  const auto s = evaluate(spoiler, items);
  CHECK(s.refinement.mean_pi < 0.0);
}

TEST_CASE("greedy_1 on an item missing three curves") {
  const Design target = Design::from_curves(
      {Curve::line({-9, -9}, {9, -9}), Curve::circle({-2, 0}, {2, 0}), Curve::arc({-6, 6}, {0, 8}, {6, 6})});
  EvalItem it = item_with(Design{}, target);
  GreedyMaker g(1);
  const MakerInput in{it.message, it.current, {}, 1, 0, &it.target};
  const double pi = proportional_improvement(g.propose_actions(in), it);
  CHECK(pi > 0.0);
  CHECK(pi < 1.0);
}

TEST_CASE("evaluate: determinism, parallelism, failures") {
  const auto items = build_benchmark(corpus(10, 4, 3, 0, 2));
  RandomMaker random(7);
  EvalOptions opts;
  opts.seed = 3;
  const auto a = evaluate(random, items, opts);
  const auto b = evaluate(random, items, opts);
  opts.parallel = 4;
  const auto c = evaluate(random, items, opts);
  REQUIRE(a.items.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(a.items[i].pi == b.items[i].pi);
    CHECK(a.items[i].pi == c.items[i].pi);
    CHECK(a.items[i].rollout_id == c.items[i].rollout_id);
  }

  Thrower thrower;
  const auto t = evaluate(thrower, items);
  CHECK(t.overall.failures == static_cast<int>(items.size()));
  CHECK(t.overall.mean_pi == 0.0);
  CHECK(t.items[0].error == "no");

  std::vector<EvalItem> zero{items[0]};
  zero[0].current = zero[0].target;
  NoopMaker noop;
  CHECK_THROWS_AS(evaluate(noop, zero), Error);
}

TEST_CASE("ablation reaches the agent") {
  const auto items = build_benchmark(corpus(11, 4, 3, 0, 3));
  Spy none, no_text, no_drawing;
  evaluate(none, items);
  evaluate(no_text, items, {AblationMode::drop_text});
  evaluate(no_drawing, items, {AblationMode::drop_drawing});
  CHECK(none.saw_text > 0);
  CHECK(none.saw_drawing > 0);
  CHECK(no_text.saw_text == 0);
  CHECK(no_text.saw_history_text == 0);
  CHECK(no_text.saw_drawing == none.saw_drawing);
  CHECK(no_drawing.saw_drawing == 0);
  CHECK(no_drawing.saw_history_drawing == 0);
  CHECK(no_drawing.saw_text == none.saw_text);
}

TEST_CASE("make_baseline") {
  CHECK(make_baseline("noop")->name() == "noop");
  CHECK(make_baseline("greedy:2")->name() == "greedy:2");
  CHECK(make_baseline("greedy_3")->name() == "greedy:3");
  CHECK(make_baseline("random:5")->name() == "random");
  CHECK(make_baseline("oracle")->privileged());
  CHECK_THROWS_AS(make_baseline("greedy:0"), Error);
  CHECK_THROWS_AS(make_baseline("gpt"), Error);
}

TEST_CASE("reports") {
  const auto items = build_benchmark(corpus(12, 3, 3, 0, 2));
  OracleMaker oracle;
  NoopMaker noop;
  const std::vector<EvalReport> reports{evaluate(oracle, items), evaluate(noop, items, {AblationMode::drop_text})};
  std::ostringstream csv;
  write_report_csv(csv, reports[0]);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(items.size()) + 1);
  CHECK(text.find("oracle,none,") != std::string::npos);
  std::ostringstream summary;
  write_summary(summary, reports);
  CHECK(summary.str().find("| oracle | - | 100.0 | 100.0 |") != std::string::npos);
  CHECK(summary.str().find("| noop | drop_text | 0.0 | 0.0 |") != std::string::npos);
}

TEST_CASE("scripted designer cycles") {
  ScriptedDesigner d({{"a", {}}, {"b", {}}});
  DesignerView v;
  v.round = 3;
  CHECK(d.produce_message(v).text == "a");
}
