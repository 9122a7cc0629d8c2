// SPDX-License-Identifier: Apache-2.0

// The benchmark: evaluation items built from dataset records, the
// proportional-improvement metric, maker evaluation with modality ablations,
// calibration baselines and report writers.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrcad/dataset.hpp"
#include "mrcad/game.hpp"
#include "mrcad/message.hpp"
#include "mrcad/metric.hpp"

namespace mrcad {

struct EvalItem {
  std::string rollout_id;
  std::string design_id;
  /// 1-based; 1 is generation, 2+ refinement.
  int round_index = 1;
  std::vector<Round> history;
  Design current;
  Message message;
  Design target;
  /// Reference only: what the human maker did and produced.
  std::vector<Action> human_actions;
  Design human_after;

  bool generation() const { return round_index == 1; }
};

/// (d(current) - d(A(current))) / d(current), A applied leniently. Throws
/// ZeroBaseline when current already matches the target.
double proportional_improvement(std::span<const Action> actions, const EvalItem& item, const MetricConfig& metric = {});

struct BenchmarkOptions {
  /// Only the successful rollouts of a qualifying design become items.
  bool successful_only = true;
};

/// Items for every round of the qualifying rollouts of designs with at least
/// spec.eval_min successes, sorted by (rollout id, round). Rounds that start
/// at zero distance are skipped.
std::vector<EvalItem> build_benchmark(std::span<const DatasetRecord> records, const SplitSpec& spec = {},
                                      const BenchmarkOptions& opts = {});

struct ItemResult {
  std::string rollout_id;
  int round_index = 0;
  double before = 0.0;
  double after = 0.0;
  double pi = 0.0;
  std::size_t actions = 0;
  bool failed = false;
  std::string error;
};

struct Aggregate {
  int n = 0;
  int failures = 0;
  double mean_pi = 0.0;
};

struct EvalReport {
  std::string agent;
  AblationMode ablation = AblationMode::none;
  std::vector<ItemResult> items;
  Aggregate generation;
  Aggregate refinement;
  Aggregate overall;
};

struct EvalOptions {
  AblationMode ablation = AblationMode::none;
  std::uint64_t seed = 0;
  /// Concurrent items; the agent must tolerate concurrent calls when > 1.
  int parallel = 1;
  MetricConfig metric;
};

/// Agent exceptions are recorded as failures scoring 0. Throws ZeroBaseline
/// if an item starts at zero distance.
EvalReport evaluate(MakerAgent& agent, std::span<const EvalItem> items, const EvalOptions& opts = {});

class NoopMaker : public MakerAgent {
 public:
  std::vector<Action> propose_actions(const MakerInput&) override { return {}; }
  std::string name() const override { return "noop"; }
};

/// Removes every curve, then makes every target curve.
class OracleMaker : public MakerAgent {
 public:
  std::vector<Action> propose_actions(const MakerInput& in) override;
  bool privileged() const override { return true; }
  std::string name() const override { return "oracle"; }
};

/// Up to five random actions that apply cleanly, from a generator seeded by
/// (seed, input seed).
class RandomMaker : public MakerAgent {
 public:
  explicit RandomMaker(std::uint64_t seed = 0) : seed_(seed) {}
  std::vector<Action> propose_actions(const MakerInput& in) override;
  std::string name() const override { return "random"; }

 private:
  std::uint64_t seed_;
};

/// Removes up to k curves absent from the target and adds up to k missing
/// target curves.
class GreedyMaker : public MakerAgent {
 public:
  explicit GreedyMaker(int k) : k_(k) {}
  std::vector<Action> propose_actions(const MakerInput& in) override;
  bool privileged() const override { return true; }
  std::string name() const override { return "greedy:" + std::to_string(k_); }

 private:
  int k_;
};

/// Replays the human maker's recorded actions.
class HumanReplayMaker : public MakerAgent {
 public:
  std::vector<Action> propose_actions(const MakerInput& in) override {
    return {in.privileged_reference_actions.begin(), in.privileged_reference_actions.end()};
  }
  bool privileged() const override { return true; }
  std::string name() const override { return "human"; }
};

/// noop, oracle, random[:seed], greedy:k (or greedy_k), human. Throws InvalidConfig.
std::unique_ptr<MakerAgent> make_baseline(std::string_view spec);

/// Cycles through a fixed list of messages.
class ScriptedDesigner : public DesignerAgent {
 public:
  explicit ScriptedDesigner(std::vector<Message> script = {{"make it match the target", {}}})
      : script_(std::move(script)) {}
  Message produce_message(const DesignerView& view) override;

 private:
  std::vector<Message> script_;
};

/// Item files: one object per line with rollout_id, design_id, round,
/// history, current, message, target, human_actions and human_after.
nlohmann::ordered_json to_json(const EvalItem& item);
EvalItem eval_item_from_json(const nlohmann::ordered_json& j, const std::string& where = "");
void write_items(std::ostream& out, std::span<const EvalItem> items);
std::vector<EvalItem> read_items(std::istream& in, const std::string& source = "<stream>");

/// Item-level CSV.
void write_report_csv(std::ostream& out, const EvalReport& report);
/// Generation/refinement means per agent and ablation, one row per report.
void write_summary(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace mrcad
