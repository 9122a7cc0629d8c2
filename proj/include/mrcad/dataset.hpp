// SPDX-License-Identifier: Apache-2.0

// Dataset records: canonical newline-delimited rollout files, the import
// pipeline (normalization, dedup identity, play rescaling), exclusion
// filtering, split construction and per-round statistics.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrcad/cad.hpp"
#include "mrcad/game.hpp"
#include "mrcad/metric.hpp"

namespace mrcad {

struct DatasetRecord {
  Rollout rollout;
  /// Stable id of the normalized target.
  std::string design_id;
  /// meta.rollout_id when present, else "line-<n>" from the source file.
  std::string rollout_id;
};

struct Signature {
  int h_lines = 0;
  int v_lines = 0;
  int skew_lines = 0;
  int arcs = 0;
  int circles = 0;

  int total() const { return h_lines + v_lines + skew_lines + arcs + circles; }
  std::string key() const;
  friend bool operator==(const Signature&, const Signature&) = default;
};

inline constexpr double kDefaultAngleTol = 0.5 * std::numbers::pi / 180.0;

Signature signature(const Design& design, double angle_tol = kDefaultAngleTol);

/// Half-width of the dedup grid: designs are fitted into [-10, 10]^2.
inline constexpr double kGridHalf = 10.0;

/// Uniform scale and translation fitting the control-point bounding box into a
/// centered 20 x 20 region, then integer snapping. Curves that collapse or
/// coincide after snapping are dropped. Throws DegenerateBoundingBox.
Design normalize_to_grid(const Design& design);

/// Hex digest identifying a design up to normalization, curve order and the
/// reversals same_curve accepts. Falls back to the raw design when it cannot
/// be normalized.
std::string design_id(const Design& design);

struct RescaleResult {
  std::optional<Design> design;
  /// Names the violating pair when rejected.
  std::string violation;
  bool accepted() const { return design.has_value(); }
};

/// Scales about the origin and checks the minimum-gap rules: distinct control
/// points, overlapping parallel lines and concentric circles/arcs of different
/// radii must all be at least min_gap apart, and the result must stay on the
/// canvas.
RescaleResult rescale_for_play(const Design& design, double scale, double min_gap = 1.0);

enum class ExclusionReason { no_actions, empty_message, missing_rounds, above_threshold };
std::string_view to_string(ExclusionReason r);

struct ExclusionOptions {
  /// Analysis view: also drop rollouts whose final distance is not below this.
  std::optional<double> inclusion_threshold;
  MetricConfig metric;
};

struct Excluded {
  DatasetRecord record;
  ExclusionReason reason;
};

struct FilterResult {
  std::vector<DatasetRecord> kept;
  std::vector<Excluded> excluded;
};

/// First failing rule, or nullopt if the record is kept.
std::optional<ExclusionReason> exclusion_reason(const Rollout& rollout, const ExclusionOptions& opts = {});
FilterResult exclusion_filter(std::vector<DatasetRecord> records, const ExclusionOptions& opts = {});

struct SplitSpec {
  int coverage_min = 1;
  int coverage_max = 2;
  int dense_min = 3;
  int very_dense_min = 30;
  int eval_min = 3;
  double success_threshold = 0.2;
  MetricConfig metric;
};

/// Final distance of a rollout (last design_after vs target; the empty design
/// when there are no rounds).
double final_distance(const Rollout& rollout, const MetricConfig& metric = {});
bool is_successful(const Rollout& rollout, const SplitSpec& spec);

struct SplitEntry {
  std::string design_id;
  /// "coverage", "dense", "very_dense", or "none" for designs without a success.
  std::string split;
  int successes = 0;
  int rollouts = 0;
  bool eval = false;
};

/// One entry per design id, sorted by id.
std::vector<SplitEntry> build_splits(std::span<const DatasetRecord> records, const SplitSpec& spec = {});

struct RoundStats {
  /// 1-based round index; 0 for the generation/refinement aggregates.
  int round = 0;
  std::string group;
  int n = 0;
  int text_only = 0;
  int drawing_only = 0;
  int multimodal = 0;
  int empty = 0;
  double mean_strokes = 0.0;
  double mean_ink = 0.0;
  double mean_text_length = 0.0;
  double mean_distance = 0.0;

  double drawing_share() const { return n ? static_cast<double>(drawing_only + multimodal) / n : 0.0; }
  double text_share() const { return n ? static_cast<double>(text_only + multimodal) / n : 0.0; }
};

/// Per round index, followed by the "generation" (round 1) and "refinement"
/// (rounds 2+) aggregates.
std::vector<RoundStats> round_stats(std::span<const DatasetRecord> records, const MetricConfig& metric = {});
void write_round_stats_csv(std::ostream& out, std::span<const RoundStats> stats);

struct RolloutIssue {
  /// 1-based round, or 0 for the rollout as a whole.
  int round = 0;
  std::string what;
};

/// Structural invariants: the first round starts from the empty design,
/// rounds chain, the round count fits the config and a win is within the win
/// threshold.
std::vector<RolloutIssue> validate_rollout(const Rollout& rollout, const GameConfig& cfg = condition_preset("dataset"));
/// Re-applies every round's actions (lenient) and compares with the recorded
/// design_after; also checks chaining.
std::vector<RolloutIssue> replay_check(const Rollout& rollout);

// Record files: one canonical rollout object per line.
DatasetRecord make_record(Rollout rollout, std::size_t line = 0);
std::vector<DatasetRecord> read_records(std::istream& in, const std::string& source = "<stream>");
std::vector<DatasetRecord> read_records(const std::filesystem::path& path);
void write_records(std::ostream& out, std::span<const DatasetRecord> records);
void write_records(const std::filesystem::path& path, std::span<const DatasetRecord> records);

/// Designs file: one design object per line (optionally wrapped as
/// {"design_id": ..., "design": {...}}).
std::vector<Design> read_designs(std::istream& in, const std::string& source = "<stream>");

// Synthetic corpora for tests and desk-scale experiments.
struct SyntheticSpec {
  int min_curves = 2;
  int max_curves = 6;
  /// Integer grid bound for control points; keeps targets inside [-bound, bound]^2.
  int bound = 9;
};

Design synthetic_design(std::mt19937_64& rng, const SyntheticSpec& spec = {});

/// A rollout that builds the target in `rounds` rounds, one chunk of curves per
/// round with a text and a tracing stroke. Unsuccessful rollouts end with a
/// stray line in the canvas corner instead (distance 0.25 from targets built
/// by synthetic_design).
Rollout synthetic_rollout(const Design& target, int rounds, bool success, const std::string& rollout_id);

}  // namespace mrcad
