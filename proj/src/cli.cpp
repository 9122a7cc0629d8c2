// SPDX-License-Identifier: Apache-2.0

#include "mrcad/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "mrcad/bridge.hpp"
#include "mrcad/config.hpp"
#include "mrcad/dataset.hpp"
#include "mrcad/error.hpp"
#include "mrcad/eval.hpp"
#include "mrcad/format.hpp"
#include "mrcad/server.hpp"

namespace mrcad {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
  return out;
}

/// A single JSON document (bare design or {"design": ...}), or the first line
/// of a designs file.
Design load_design(const std::string& path) {
  const std::string text = slurp(path);
  try {
    const Json j = Json::parse(text);
    if (j.is_object() && j.contains("design")) return design_from_json(j["design"], path + "#/design");
    return design_from_json(j, path + "#");
  } catch (const nlohmann::json::parse_error&) {
  }
  std::istringstream in(text);
  auto designs = read_designs(in, path);
  if (designs.empty()) throw Error(ErrorCode::SchemaError, path + ": no design found");
  return designs.front();
}

Message load_message(const std::string& path) {
  return message_from_json(parse_json(slurp(path), path), path + "#");
}

bool looks_like_items(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      return j.is_object() && j.contains("current") && j.contains("human_actions");
    } catch (const nlohmann::json::parse_error&) {
      return false;
    }
  }
  return false;
}

struct Globals {
  std::string config_path;
  bool json = false;
  GlobalConfig config;
};

int cmd_validate(const Globals& g, const std::string& path, std::ostream& out, std::ostream& err) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t n = 0, records = 0, bad = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++records;
    Json report{{"line", n}};
    std::vector<std::string> problems;
    try {
      const DatasetRecord rec = make_record(rollout_from_json(parse_json(line)), n);
      report = {{"rollout_id", rec.rollout_id}, {"line", n}};
      for (const auto& issue : validate_rollout(rec.rollout, g.config.game)) {
        problems.push_back(issue.round ? "round " + std::to_string(issue.round) + ": " + issue.what : issue.what);
        err << "rollout " << rec.rollout_id << (issue.round ? " round " + std::to_string(issue.round) : "") << ": "
            << issue.what << '\n';
      }
    } catch (const Error& e) {
      problems.push_back(e.what());
      err << path << ':' << n << ": " << e.what() << '\n';
    }
    bad += !problems.empty();
    if (g.json) {
      report["ok"] = problems.empty();
      report["issues"] = problems;
      out << dump(report) << '\n';
    }
  }
  if (!g.json) out << records << " records, " << bad << " invalid\n";
  return bad ? kExitFailure : kExitOk;
}

int cmd_replay(const Globals& g, const std::string& path, bool check, std::ostream& out, std::ostream& err) {
  const auto records = read_records(std::filesystem::path(path));
  int failures = 0;
  for (const auto& rec : records) {
    if (check) {
      const auto issues = replay_check(rec.rollout);
      for (const auto& issue : issues) {
        err << "rollout " << rec.rollout_id << " round " << issue.round << ": " << issue.what << '\n';
      }
      failures += !issues.empty();
      if (g.json) {
        Json bad = Json::array();
        for (const auto& issue : issues) bad.push_back({{"round", issue.round}, {"error", issue.what}});
        out << dump({{"rollout_id", rec.rollout_id}, {"ok", issues.empty()}, {"issues", bad}}) << '\n';
      }
      continue;
    }
    Design cur;
    for (std::size_t i = 0; i < rec.rollout.rounds.size(); ++i) {
      const auto& r = rec.rollout.rounds[i];
      const auto applied = apply_all(cur, r.actions, ApplyMode::lenient);
      cur = applied.design;
      const double d = chamfer(cur, rec.rollout.target, g.config.metric);
      if (g.json) {
        out << dump({{"rollout_id", rec.rollout_id},
                     {"round", i + 1},
                     {"actions", r.actions.size()},
                     {"skipped", applied.skipped},
                     {"distance", d}})
            << '\n';
      } else {
        out << rec.rollout_id << " round " << i + 1 << " distance " << format_number(d) << '\n';
      }
    }
  }
  if (check && !g.json) out << records.size() - failures << "/" << records.size() << " rollouts replay cleanly\n";
  return failures ? kExitFailure : kExitOk;
}

int cmd_score(const Globals& g, const std::string& a, const std::string& b, std::ostream& out) {
  const double d = chamfer(load_design(a), load_design(b), g.config.metric);
  if (g.json) {
    out << dump({{"distance", d}}) << '\n';
  } else {
    out << format_number(d) << '\n';
  }
  return kExitOk;
}

int cmd_render(const Globals& g, const std::string& design, bool png, const std::string& output,
               const std::string& overlay, int size, std::ostream& out) {
  Scene scene{load_design(design), {}, g.config.render};
  if (!overlay.empty()) scene.overlay = load_message(overlay).drawing;
  if (png) {
    if (output.empty()) throw UsageError("--png needs -o/--output");
    write_png(rasterize(scene, size, size), output);
    return kExitOk;
  }
  const std::string svg = scene_to_svg(scene, Viewport{static_cast<double>(size)});
  if (output.empty()) {
    out << svg;
  } else {
    open_out(output) << svg;
  }
  return kExitOk;
}

int cmd_import(const Globals& g, const std::string& path, std::optional<double> rescale, double min_gap,
               const std::string& output, std::ostream& out, std::ostream& err) {
  std::ifstream in = open_in(path);
  const auto designs = read_designs(in, path);
  std::ofstream file;
  if (!output.empty()) file = open_out(output);
  std::ostream& dest = output.empty() ? out : file;
  std::map<std::string, std::size_t> seen;
  int kept = 0, duplicates = 0, rejected = 0;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const std::string id = design_id(designs[i]);
    if (auto [it, fresh] = seen.emplace(id, i + 1); !fresh) {
      ++duplicates;
      err << path << " design " << i + 1 << ": duplicate of design " << it->second << " (" << id << ")\n";
      continue;
    }
    Design d = designs[i];
    if (rescale) {
      const auto r = rescale_for_play(d, *rescale, min_gap);
      if (!r.accepted()) {
        ++rejected;
        err << path << " design " << i + 1 << ": rejected: " << r.violation << '\n';
        continue;
      }
      d = *r.design;
    }
    ++kept;
    dest << dump({{"design_id", id}, {"design", to_json(d)}}) << '\n';
  }
  const Json summary{{"read", designs.size()}, {"kept", kept}, {"duplicates", duplicates}, {"rejected", rejected}};
  if (g.json && !output.empty()) {
    out << dump(summary) << '\n';
  } else {
    err << "read " << designs.size() << ", kept " << kept << ", duplicates " << duplicates << ", rejected "
        << rejected << '\n';
  }
  return kExitOk;
}

int cmd_split(const Globals& g, const std::string& path, const std::string& manifest, const std::string& stats,
              const std::string& items, bool all_rollouts, double success_threshold, std::ostream& out) {
  const auto records = read_records(std::filesystem::path(path));
  SplitSpec spec;
  spec.metric = g.config.metric;
  spec.success_threshold = success_threshold;
  const auto entries = build_splits(records, spec);
  {
    std::ofstream m = open_out(manifest);
    for (const auto& e : entries) {
      m << dump({{"design_id", e.design_id},
                 {"split", e.split},
                 {"successes", e.successes},
                 {"rollouts", e.rollouts},
                 {"eval", e.eval}})
        << '\n';
    }
  }
  if (!stats.empty()) {
    std::ofstream s = open_out(stats);
    write_round_stats_csv(s, round_stats(records, g.config.metric));
  }
  std::size_t n_items = 0;
  if (!items.empty()) {
    const auto bench = build_benchmark(records, spec, {!all_rollouts});
    std::ofstream s = open_out(items);
    write_items(s, bench);
    n_items = bench.size();
  }
  std::map<std::string, int> counts{{"coverage", 0}, {"dense", 0}, {"very_dense", 0}, {"none", 0}};
  int eval = 0;
  for (const auto& e : entries) {
    ++counts[e.split];
    eval += e.eval;
  }
  if (g.json) {
    Json j{{"designs", entries.size()}, {"eval_designs", eval}};
    for (const auto& [k, v] : counts) j[k] = v;
    if (!items.empty()) j["items"] = n_items;
    out << dump(j) << '\n';
  } else {
    out << "designs " << entries.size() << "\ncoverage " << counts["coverage"] << "\ndense " << counts["dense"]
        << "\nvery_dense " << counts["very_dense"] << "\nnone " << counts["none"] << "\neval_designs " << eval << '\n';
    if (!items.empty()) out << "items " << n_items << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string input;
  std::string agent;
  std::string ablate = "none";
  std::string report;
  std::string summary;
  std::uint64_t seed = 0;
  int parallel = 1;
  bool all_rollouts = false;
  std::string transcript;
  std::string record;
};

std::unique_ptr<MakerAgent> make_agent(const Globals& g, const EvalArgs& a, std::ostream& err,
                                       std::vector<std::shared_ptr<void>>& keep) {
  if (a.agent != "chat" && a.agent.rfind("chat:", 0) != 0) return make_baseline(a.agent);
  GlobalConfig cfg = g.config;
  if (a.agent.size() > 5) cfg = load_config(a.agent.substr(5));
  std::shared_ptr<Transport> transport;
  if (!a.transcript.empty()) {
    transport = std::make_shared<ReplayTransport>(std::filesystem::path(a.transcript));
  } else {
    transport = std::make_shared<HttpTransport>(cfg.endpoint);
  }
  if (!a.record.empty()) {
    auto file = std::make_shared<std::ofstream>(open_out(a.record));
    keep.push_back(file);
    keep.push_back(transport);
    transport = std::make_shared<RecordingTransport>(*transport, *file);
  }
  PromptConfig prompt;
  prompt.style = cfg.render;
  prompt.image_size = cfg.image_size;
  return std::make_unique<ChatMaker>(transport, cfg.endpoint, prompt,
                                     [&err](const std::string& s) { err << s << '\n'; });
}

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<EvalItem> items;
  if (looks_like_items(a.input)) {
    std::ifstream in = open_in(a.input);
    items = read_items(in, a.input);
  } else {
    SplitSpec spec;
    spec.metric = g.config.metric;
    items = build_benchmark(read_records(std::filesystem::path(a.input)), spec, {!a.all_rollouts});
  }
  EvalOptions opts;
  if (a.ablate == "text") {
    opts.ablation = AblationMode::drop_text;
  } else if (a.ablate == "drawing") {
    opts.ablation = AblationMode::drop_drawing;
  } else if (a.ablate != "none") {
    throw UsageError("--ablate must be text, drawing or none");
  }
  opts.seed = a.seed;
  opts.parallel = a.parallel;
  opts.metric = g.config.metric;
  std::vector<std::shared_ptr<void>> keep;
  auto agent = make_agent(g, a, err, keep);
  const EvalReport report = evaluate(*agent, items, opts);
  if (!a.report.empty()) {
    std::ofstream r = open_out(a.report);
    write_report_csv(r, report);
  }
  if (!a.summary.empty()) {
    std::ofstream s = open_out(a.summary);
    write_summary(s, std::span<const EvalReport>(&report, 1));
  }
  if (g.json) {
    out << dump({{"agent", report.agent},
                 {"ablation", to_string(report.ablation)},
                 {"items", report.items.size()},
                 {"generation", report.generation.mean_pi},
                 {"refinement", report.refinement.mean_pi},
                 {"overall", report.overall.mean_pi},
                 {"n_generation", report.generation.n},
                 {"n_refinement", report.refinement.n},
                 {"failures", report.overall.failures}})
        << '\n';
  } else {
    write_summary(out, std::span<const EvalReport>(&report, 1));
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string designs;
  int synthetic = 0;
  int min_curves = 2;
  int max_curves = 6;
  std::string agent = "oracle";
  std::string preset;
  std::string output;
  std::uint64_t seed = 0;
  std::vector<std::string> script;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out) {
  std::vector<Design> targets;
  if (!a.designs.empty()) {
    std::ifstream in = open_in(a.designs);
    targets = read_designs(in, a.designs);
  } else if (a.synthetic > 0) {
    std::mt19937_64 rng(a.seed);
    for (int i = 0; i < a.synthetic; ++i) targets.push_back(synthetic_design(rng, {a.min_curves, a.max_curves, 9}));
  } else {
    throw UsageError("simulate needs --designs or --synthetic N");
  }
  GameConfig cfg = g.config.game;
  if (!a.preset.empty()) {
    cfg = condition_preset(a.preset);
    cfg.metric = g.config.metric;
  }
  std::vector<Message> script;
  for (const auto& s : a.script) script.push_back({s, {}});
  if (script.empty()) script.push_back({"make it match the target", {}});
  ScriptedDesigner designer(script);
  auto maker = make_baseline(a.agent);
  std::ofstream file;
  if (!a.output.empty()) file = open_out(a.output);
  int won = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "sim-%04zu", i + 1);
    PlayOptions opts;
    opts.seed = a.seed * 1000003u + i;
    opts.meta = {{"rollout_id", id}, {"condition", cfg.name}, {"maker", maker->name()}};
    const Rollout r = play(targets[i], designer, *maker, cfg, opts);
    won += r.outcome == Outcome::won;
    if (!a.output.empty()) file << dump(to_json(r)) << '\n';
  }
  if (g.json) {
    out << dump({{"games", targets.size()}, {"won", won}}) << '\n';
  } else {
    out << "won " << won << "/" << targets.size() << '\n';
  }
  return kExitOk;
}

int cmd_serve(const Globals& g, const std::string& host, int port, const std::string& data_dir, bool dry_run,
              std::ostream& out) {
  ServerConfig sc = g.config.server;
  if (!host.empty()) sc.host = host;
  if (port >= 0) sc.port = port;
  if (!data_dir.empty()) sc.data_dir = data_dir;
  std::vector<Design> pool;
  if (sc.targets) {
    std::ifstream in = open_in(sc.targets->string());
    pool = read_designs(in, sc.targets->string());
  }
  if (dry_run) {
    GlobalConfig shown = g.config;
    shown.server = sc;
    out << dump(to_json(shown)) << '\n';
    return kExitOk;
  }
  auto storage = std::make_shared<FileStorage>(sc.data_dir);
  SessionManager manager(storage, ServerSettings{sc.heartbeat, sc.disconnect_grace, g.config.seed});
  manager.set_target_pool(std::move(pool));
  HttpServer server(manager);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  const int bound = server.start(sc.host, sc.port);
  out << "listening on http://" << sc.host << ':' << bound << " (data in " << sc.data_dir.string() << ")"
      << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mrCAD environment: CAD kernel, metric, game engine, dataset and evaluation tools", "mrcad"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--json", g.json, "One JSON object per output line");

  std::string path, path_b, output, overlay, manifest, stats, items_out, host, data_dir;
  bool check = false, svg = false, png = false, all_rollouts = false, dry_run = false;
  int size = 512, port = -1;
  std::optional<double> rescale;
  double min_gap = 1.0, success_threshold = 0.2;

  auto* validate = app.add_subcommand("validate", "Schema and invariant check of a records file");
  validate->add_option("records", path)->required();

  auto* replay = app.add_subcommand("replay", "Re-apply every round of a records file");
  replay->add_option("records", path)->required();
  replay->add_flag("--check", check, "Verify replay consistency and chaining");

  auto* score = app.add_subcommand("score", "Chamfer distance between two designs");
  score->add_option("a", path)->required();
  score->add_option("b", path_b)->required();

  auto* render = app.add_subcommand("render", "Render a design to SVG or PNG");
  render->add_option("design", path)->required();
  auto* svg_flag = render->add_flag("--svg", svg, "SVG output (default)");
  render->add_flag("--png", png, "PNG output (needs --output)")->excludes(svg_flag);
  render->add_option("-o,--output", output);
  render->add_option("--overlay", overlay, "Message JSON whose strokes are drawn on top");
  render->add_option("--size", size)->check(CLI::Range(16, 4096));

  auto* import = app.add_subcommand("import", "Deduplicate designs and optionally rescale them for play");
  import->add_option("designs", path)->required();
  import->add_option("--rescale", rescale, "Uniform scale factor");
  import->add_option("--min-gap", min_gap)->check(CLI::PositiveNumber);
  import->add_option("-o,--output", output);

  auto* split = app.add_subcommand("split", "Build the coverage/dense/very-dense split manifest");
  split->add_option("records", path)->required();
  split->add_option("--out", manifest)->required();
  split->add_option("--stats", stats, "Per-round statistics CSV");
  split->add_option("--items", items_out, "Benchmark items file");
  split->add_flag("--all-rollouts", all_rollouts, "Benchmark items from every rollout of a qualifying design");
  split->add_option("--success-threshold", success_threshold)->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a maker agent on a benchmark");
  eval->add_option("input", ea.input, "Items or records file")->required();
  eval->add_option("--agent", ea.agent, "noop | oracle | human | random[:seed] | greedy:k | chat[:config]")
      ->required();
  eval->add_option("--ablate", ea.ablate)->check(CLI::IsMember({"none", "text", "drawing"}));
  eval->add_option("--report", ea.report, "Item-level CSV");
  eval->add_option("--summary", ea.summary, "Markdown summary table");
  eval->add_option("--seed", ea.seed);
  eval->add_option("--parallel", ea.parallel)->check(CLI::Range(1, 256));
  eval->add_flag("--all-rollouts", ea.all_rollouts);
  eval->add_option("--transcript", ea.transcript, "Serve chat responses from a recorded transcript");
  eval->add_option("--record", ea.record, "Record chat responses to a transcript");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Play scripted-designer games against a baseline maker");
  auto* designs_opt = simulate->add_option("--designs", sa.designs);
  simulate->add_option("--synthetic", sa.synthetic)->excludes(designs_opt)->check(CLI::Range(1, 1000000));
  simulate->add_option("--min-curves", sa.min_curves)->check(CLI::Range(1, 50));
  simulate->add_option("--max-curves", sa.max_curves)->check(CLI::Range(1, 50));
  simulate->add_option("--agent", sa.agent);
  simulate->add_option("--preset", sa.preset);
  simulate->add_option("--seed", sa.seed);
  simulate->add_option("--say", sa.script, "Designer script (repeatable)");
  simulate->add_option("-o,--output", sa.output);

  auto* serve = app.add_subcommand("serve", "Run the game server");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--data-dir", data_dir);
  serve->add_flag("--dry-run", dry_run, "Print the resolved config and exit");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mrcad: " << e.what() << "\n" << "Run with --help for usage.\n";
    return kExitUsage;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->get_help_ptr() && sub->get_help_ptr()->count()) {
      out << sub->help();
      return kExitOk;
    }
  }

  try {
    if (!g.config_path.empty()) g.config = load_config(g.config_path);
    if (validate->parsed()) return cmd_validate(g, path, out, err);
    if (replay->parsed()) return cmd_replay(g, path, check, out, err);
    if (score->parsed()) return cmd_score(g, path, path_b, out);
    if (render->parsed()) return cmd_render(g, path, png, output, overlay, size, out);
    if (import->parsed()) return cmd_import(g, path, rescale, min_gap, output, out, err);
    if (split->parsed()) {
      return cmd_split(g, path, manifest, stats, items_out, all_rollouts, success_threshold, out);
    }
    if (eval->parsed()) return cmd_eval(g, ea, out, err);
    if (simulate->parsed()) return cmd_simulate(g, sa, out);
    if (serve->parsed()) return cmd_serve(g, host, port, data_dir, dry_run, out);
  } catch (const UsageError& e) {
    err << "mrcad: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "mrcad: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "mrcad: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mrcad
