// SPDX-License-Identifier: Apache-2.0

#include "mrcad/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <thread>
#include <tuple>

#include "mrcad/error.hpp"
#include "mrcad/format.hpp"
#include "mrcad/serialize.hpp"

namespace mrcad {

namespace {

bool contains(std::span<const Curve> curves, const Curve& c) {
  return std::any_of(curves.begin(), curves.end(), [&](const Curve& e) { return same_curve(e, c, kIdentityEps); });
}

const Design& need_target(const MakerInput& in, std::string_view who) {
  if (!in.privileged_target) throw Error(ErrorCode::AgentError, std::string(who) + " needs the target");
  return *in.privileged_target;
}

Aggregate aggregate(std::span<const ItemResult> results, std::span<const EvalItem> items, int which) {
  Aggregate a;
  double total = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const bool gen = items[i].generation();
    if ((which == 1 && !gen) || (which == 2 && gen)) continue;
    ++a.n;
    a.failures += results[i].failed;
    total += results[i].pi;
  }
  a.mean_pi = a.n ? total / a.n : 0.0;
  return a;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

double proportional_improvement(std::span<const Action> actions, const EvalItem& item, const MetricConfig& metric) {
  const double before = chamfer(item.current, item.target, metric);
  if (before <= 0.0) {
    throw Error(ErrorCode::ZeroBaseline, "item " + item.rollout_id + " round " + std::to_string(item.round_index) +
                                             " already matches the target");
  }
  const Design after = apply_all(item.current, actions, ApplyMode::lenient).design;
  return (before - chamfer(after, item.target, metric)) / before;
}

std::vector<EvalItem> build_benchmark(std::span<const DatasetRecord> records, const SplitSpec& spec,
                                      const BenchmarkOptions& opts) {
  std::map<std::string, bool> qualifying;
  for (const auto& s : build_splits(records, spec)) qualifying[s.design_id] = s.eval;
  std::vector<EvalItem> items;
  for (const auto& rec : records) {
    if (!qualifying[rec.design_id]) continue;
    if (opts.successful_only && !is_successful(rec.rollout, spec)) continue;
    const auto& rounds = rec.rollout.rounds;
    for (std::size_t i = 0; i < rounds.size(); ++i) {
      if (chamfer(rounds[i].design_before, rec.rollout.target, spec.metric) <= 0.0) continue;
      EvalItem item;
      item.rollout_id = rec.rollout_id;
      item.design_id = rec.design_id;
      item.round_index = static_cast<int>(i) + 1;
      item.history.assign(rounds.begin(), rounds.begin() + static_cast<std::ptrdiff_t>(i));
      item.current = rounds[i].design_before;
      item.message = rounds[i].message;
      item.target = rec.rollout.target;
      item.human_actions = rounds[i].actions;
      item.human_after = rounds[i].design_after;
      items.push_back(std::move(item));
    }
  }
  std::stable_sort(items.begin(), items.end(), [](const EvalItem& a, const EvalItem& b) {
    return std::tie(a.rollout_id, a.round_index) < std::tie(b.rollout_id, b.round_index);
  });
  return items;
}

EvalReport evaluate(MakerAgent& agent, std::span<const EvalItem> items, const EvalOptions& opts) {
  std::vector<double> before(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    before[i] = chamfer(items[i].current, items[i].target, opts.metric);
    if (before[i] <= 0.0) {
      throw Error(ErrorCode::ZeroBaseline, "item " + items[i].rollout_id + " round " +
                                               std::to_string(items[i].round_index) + " already matches the target");
    }
  }
  std::vector<ItemResult> results(items.size());
  const auto run = [&](std::size_t i) {
    const EvalItem& item = items[i];
    ItemResult& res = results[i];
    res.rollout_id = item.rollout_id;
    res.round_index = item.round_index;
    res.before = before[i];
    res.after = before[i];
    const Message message = ablate(item.message, opts.ablation);
    std::vector<Round> history = item.history;
    for (auto& r : history) r.message = ablate(r.message, opts.ablation);
    MakerInput input{message, item.current, history, item.round_index, opts.seed * 1000003u + i};
    if (agent.privileged()) {
      input.privileged_target = &item.target;
      input.privileged_reference_actions = item.human_actions;
    }
    try {
      const auto actions = agent.propose_actions(input);
      res.actions = actions.size();
      res.after = chamfer(apply_all(item.current, actions, ApplyMode::lenient).design, item.target, opts.metric);
      res.pi = (res.before - res.after) / res.before;
    } catch (const std::exception& e) {
      res.failed = true;
      res.error = e.what();
      res.pi = 0.0;
    }
  };
  const int workers = std::max(1, std::min<int>(opts.parallel, static_cast<int>(items.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size(); i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  EvalReport report;
  report.agent = agent.name();
  report.ablation = opts.ablation;
  report.generation = aggregate(results, items, 1);
  report.refinement = aggregate(results, items, 2);
  report.overall = aggregate(results, items, 0);
  report.items = std::move(results);
  return report;
}

std::vector<Action> OracleMaker::propose_actions(const MakerInput& in) {
  const Design& target = need_target(in, "oracle");
  std::vector<Action> out;
  for (const auto& c : in.current.curves()) out.push_back(RemoveCurve{c});
  for (const auto& c : target.curves()) out.push_back(MakeCurve{c});
  return out;
}

std::vector<Action> RandomMaker::propose_actions(const MakerInput& in) {
  std::mt19937_64 rng(seed_ * 0x9E3779B97F4A7C15ull ^ in.seed);
  const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const auto grid = [&]() -> Point { return {pick(-36, 36) * 0.5, pick(-36, 36) * 0.5}; };
  const int want = pick(1, 5);
  std::vector<Action> out;
  Design cur = in.current;
  for (int attempt = 0; attempt < 100 && static_cast<int>(out.size()) < want; ++attempt) {
    Action a;
    const auto& idx = cur.point_index();
    const int kind = cur.empty() ? 0 : pick(0, 4);
    switch (kind) {
      case 0: {
        const int k = pick(0, 2);
        const Point p = grid();
        const Point q = grid();
        const Point r = grid();
        a = MakeCurve{k == 0 ? Curve::line(p, q) : k == 1 ? Curve::circle(p, q) : Curve::arc(p, q, r)};
        break;
      }
      case 1:
        a = RemoveCurve{cur.curves()[static_cast<std::size_t>(pick(0, static_cast<int>(cur.size()) - 1))]};
        break;
      case 2:
        a = MoveCurve{cur.curves()[static_cast<std::size_t>(pick(0, static_cast<int>(cur.size()) - 1))],
                      {pick(-6, 6) * 0.5, pick(-6, 6) * 0.5}};
        break;
      case 3:
        a = MovePoint{idx[static_cast<std::size_t>(pick(0, static_cast<int>(idx.size()) - 1))].point, grid()};
        break;
      default:
        a = DeletePoint{idx[static_cast<std::size_t>(pick(0, static_cast<int>(idx.size()) - 1))].point};
        break;
    }
    try {
      cur = apply_action(cur, a);
      out.push_back(std::move(a));
    } catch (const Error&) {
    }
  }
  return out;
}

std::vector<Action> GreedyMaker::propose_actions(const MakerInput& in) {
  const Design& target = need_target(in, "greedy");
  std::vector<Action> out;
  int removed = 0, added = 0;
  for (const auto& c : in.current.curves()) {
    if (removed < k_ && !contains(target.curves(), c)) {
      out.push_back(RemoveCurve{c});
      ++removed;
    }
  }
  for (const auto& c : target.curves()) {
    if (added < k_ && !contains(in.current.curves(), c)) {
      out.push_back(MakeCurve{c});
      ++added;
    }
  }
  return out;
}

std::unique_ptr<MakerAgent> make_baseline(std::string_view spec) {
  const auto suffix = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (spec.substr(0, prefix.size()) == prefix) return spec.substr(prefix.size());
    return std::nullopt;
  };
  const auto number = [&](std::string_view s) -> long long {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(std::string(s), &used);
      if (used == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidConfig, "bad number in agent spec '" + std::string(spec) + "'");
  };
  if (spec == "noop") return std::make_unique<NoopMaker>();
  if (spec == "oracle") return std::make_unique<OracleMaker>();
  if (spec == "human") return std::make_unique<HumanReplayMaker>();
  if (spec == "random") return std::make_unique<RandomMaker>();
  if (auto s = suffix("random:")) return std::make_unique<RandomMaker>(static_cast<std::uint64_t>(number(*s)));
  for (std::string_view prefix : {"greedy:", "greedy_"}) {
    if (auto s = suffix(prefix)) {
      const long long k = number(*s);
      if (k < 1) break;
      return std::make_unique<GreedyMaker>(static_cast<int>(k));
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown agent '" + std::string(spec) + "'");
}

Message ScriptedDesigner::produce_message(const DesignerView& view) {
  if (script_.empty()) return {"make it match the target", {}};
  return script_[static_cast<std::size_t>(view.round - 1) % script_.size()];
}

Json to_json(const EvalItem& item) {
  Json history = Json::array();
  for (const auto& r : item.history) history.push_back(to_json(r));
  Json actions = Json::array();
  for (const auto& a : item.human_actions) actions.push_back(to_json(a));
  return {{"rollout_id", item.rollout_id},       {"design_id", item.design_id},
          {"round", item.round_index},           {"history", std::move(history)},
          {"current", to_json(item.current)},    {"message", to_json(item.message)},
          {"target", to_json(item.target)},      {"human_actions", std::move(actions)},
          {"human_after", to_json(item.human_after)}};
}

EvalItem eval_item_from_json(const Json& j, const std::string& where) {
  const auto fail = [&](const std::string& at, const std::string& what) {
    throw Error(ErrorCode::SchemaError, where + at + ": " + what);
  };
  if (!j.is_object()) fail("", "expected an item object");
  for (const char* key : {"rollout_id", "design_id", "round", "history", "current", "message", "target",
                          "human_actions", "human_after"}) {
    if (!j.contains(key)) fail("", std::string("missing key \"") + key + "\"");
  }
  for (const auto& [k, v] : j.items()) {
    static const std::vector<std::string> known{"rollout_id", "design_id", "round", "history", "current",
                                                "message", "target", "human_actions", "human_after"};
    if (std::find(known.begin(), known.end(), k) == known.end()) fail("/" + k, "unknown key");
  }
  EvalItem item;
  if (!j["rollout_id"].is_string()) fail("/rollout_id", "expected a string");
  if (!j["design_id"].is_string()) fail("/design_id", "expected a string");
  if (!j["round"].is_number_integer() || j["round"].get<int>() < 1) fail("/round", "expected a positive integer");
  if (!j["history"].is_array()) fail("/history", "expected an array");
  if (!j["human_actions"].is_array()) fail("/human_actions", "expected an array");
  item.rollout_id = j["rollout_id"].get<std::string>();
  item.design_id = j["design_id"].get<std::string>();
  item.round_index = j["round"].get<int>();
  for (std::size_t i = 0; i < j["history"].size(); ++i) {
    item.history.push_back(round_from_json(j["history"][i], where + "/history/" + std::to_string(i)));
  }
  item.current = design_from_json(j["current"], where + "/current");
  item.message = message_from_json(j["message"], where + "/message");
  item.target = design_from_json(j["target"], where + "/target");
  for (std::size_t i = 0; i < j["human_actions"].size(); ++i) {
    item.human_actions.push_back(action_from_json(j["human_actions"][i], where + "/human_actions/" + std::to_string(i)));
  }
  item.human_after = design_from_json(j["human_after"], where + "/human_after");
  return item;
}

void write_items(std::ostream& out, std::span<const EvalItem> items) {
  for (const auto& item : items) out << dump(to_json(item)) << '\n';
}

std::vector<EvalItem> read_items(std::istream& in, const std::string& source) {
  std::vector<EvalItem> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(eval_item_from_json(parse_json(line)));
    } catch (const Error& e) {
      throw Error(e.code(), source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "agent,ablation,rollout_id,round,group,distance_before,distance_after,pi,actions,failed,error\n";
  for (const auto& r : report.items) {
    out << csv_field(report.agent) << ',' << to_string(report.ablation) << ',' << csv_field(r.rollout_id) << ','
        << r.round_index << ',' << (r.round_index == 1 ? "generation" : "refinement") << ','
        << format_number(r.before) << ',' << format_number(r.after) << ',' << format_number(r.pi) << ','
        << r.actions << ',' << (r.failed ? 1 : 0) << ',' << csv_field(r.error) << '\n';
  }
}

void write_summary(std::ostream& out, std::span<const EvalReport> reports) {
  out << "| agent | ablation | generation | refinement | n_generation | n_refinement | failures |\n";
  out << "|---|---|---|---|---|---|---|\n";
  const auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    out << "| " << r.agent << " | " << (r.ablation == AblationMode::none ? "-" : std::string(to_string(r.ablation)))
        << " | " << pct(r.generation.mean_pi) << " | " << pct(r.refinement.mean_pi) << " | " << r.generation.n << " | "
        << r.refinement.n << " | " << r.overall.failures << " |\n";
  }
}

}  // namespace mrcad
