#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "conav/config.hpp"
#include "conav/evalkit.hpp"
#include "conav/llm_backend.hpp"
#include "conav/version.hpp"

namespace fs = std::filesystem;
using namespace conav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTaskFailed = 2;
constexpr int kExitDivergence = 3;

std::vector<NamedScenario> collect_scenarios(
    const std::vector<std::string>& paths) {
  std::vector<NamedScenario> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files)
        out.push_back({f.stem().string(), load_scenario(f.string())});
    } else {
      out.push_back({fs::path(p).stem().string(), load_scenario(p)});
    }
  }
  if (out.empty()) throw ConfigError("no scenario files found");
  return out;
}

void render_frame(std::ostream& os, const Scenario& s, const Pose& pose,
                  int t, Action action, StepOutcome outcome) {
  os << "t=" << t << " action=" << to_string(action)
     << " outcome=" << to_string(outcome) << "\n";
  GridCoord agent = s.cell_of(pose.x, pose.y);
  for (int r = s.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < s.cols(); ++c) {
      if (agent.r == r && agent.c == c) {
        switch (normalize_heading(pose.heading)) {
          case 0: os << '>'; break;
          case 90: os << '^'; break;
          case 180: os << '<'; break;
          default: os << 'v'; break;
        }
      } else {
        os << s.grid[r][c];
      }
    }
    os << "\n";
  }
  os << "\n";
}

ExperienceBank load_bank_if_exists(const std::string& path) {
  if (path.empty() || !fs::exists(path)) return {};
  return ExperienceBank::load(path);
}

int cmd_run(const RunConfig& cfg) {
  if (cfg.scenario_paths.size() != 1)
    throw ConfigError("run needs exactly one --scenario");
  Scenario scenario = load_scenario(cfg.scenario_paths[0]);

  ExperienceBank bank = load_bank_if_exists(cfg.bank_path);
  std::shared_ptr<HttpChatClient> client;
  Backends backends = cfg.build_backends(&client);

  TraceWriter writer = cfg.trace_path.empty() ? TraceWriter{}
                                              : TraceWriter{cfg.trace_path};
  if (client)
    client->audit = [&writer](json j) { writer.record(std::move(j)); };

  EpisodeResult result =
      run_episode(scenario, backends, cfg.episode, writer, &bank);

  if (!cfg.bank_path.empty()) {
    for (const auto& e : result.distilled) bank.store(e);
    bank.persist(cfg.bank_path);
  }

  EpisodeMetrics m = score_episode(trace_from_records(writer.records()),
                                   scenario, cfg.episode.radius);
  json out;
  out["status"] = m.status;
  out["cause"] = m.failure_cause;
  out["nl"] = m.nl;
  out["ne"] = m.ne;
  out["success"] = m.success;
  out["oracle_success"] = m.oracle_success;
  out["length"] = m.length;
  out["optimal"] = m.optimal;
  out["spl_term"] =
      m.success ? m.optimal / std::max(m.length, m.optimal) : 0.0;
  out["distilled"] = static_cast<int>(result.distilled.size());
  std::cout << out.dump(2) << "\n";
  return result.status == EpisodeStatus::Done ? kExitOk : kExitTaskFailed;
}

int cmd_bench(const RunConfig& cfg) {
  auto scenarios = collect_scenarios(cfg.scenario_paths);
  ExperienceBank bank = load_bank_if_exists(cfg.bank_path);
  auto factory = [&cfg]() {
    return cfg.build_backends(nullptr);
  };

  BenchOptions opts;
  opts.config = cfg.episode;
  opts.repeats = cfg.repeat;
  opts.seed_base = cfg.seed_base;
  opts.jobs = cfg.jobs;
  opts.trace_dir = cfg.trace_dir;
  opts.initial_bank = &bank;

  ExperienceBank grown = bank;
  BenchReport report = run_bench(scenarios, factory, opts, &grown);
  if (!cfg.bank_path.empty()) grown.persist(cfg.bank_path);

  if (!cfg.report_dir.empty()) {
    fs::create_directories(cfg.report_dir);
    std::ofstream js(cfg.report_dir + "/report.json");
    js << report.to_json().dump(2) << "\n";
    std::ofstream txt(cfg.report_dir + "/report.txt");
    txt << report.to_text();
  }
  std::cout << report.to_text();
  return kExitOk;
}

int cmd_gen(uint64_t seed, int rows, int cols, int landmarks, int subtasks,
            const std::string& kind, const std::string& out_path) {
  Scenario s;
  if (kind == "random") {
    s = generate_scenario(seed, rows, cols, landmarks, subtasks);
  } else if (kind == "glass") {
    s = make_glass_corridor(seed);
  } else if (kind == "revisit") {
    s = make_revisit_maze(seed);
  } else {
    throw ConfigError("unknown scenario kind '" + kind + "'");
  }
  if (out_path.empty()) {
    std::cout << to_json(s).dump(2) << "\n";
  } else {
    save_scenario(s, out_path);
    std::cout << "wrote " << out_path << " (hash " << scenario_hash(s) << ")\n";
  }
  return kExitOk;
}

int cmd_replay(const std::string& trace_path, const std::string& render) {
  Trace trace = read_trace(trace_path);
  Scenario scenario = trace.scenario();
  replay_transitions(trace);

  if (render == "ascii") {
    for (const auto& h : trace.of_kind("history")) {
      HistoryRecord rec = HistoryRecord::from_json(h);
      render_frame(std::cout, scenario, rec.pose, rec.t, rec.action,
                   rec.outcome);
    }
  }

  if (!replay_matches(trace)) {
    std::cerr << "replay divergence: recorded trajectory does not match "
                 "re-simulation\n";
    return kExitDivergence;
  }
  std::cout << "replay ok: " << trace.of_kind("history").size() << " steps\n";
  return kExitOk;
}

int cmd_memory_inspect(const std::string& bank_path, const std::string& query,
                       int top_k) {
  ExperienceBank bank = ExperienceBank::load(bank_path);
  auto hits = bank.retrieve(encode(query), static_cast<size_t>(top_k));
  for (const auto& h : hits) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-32s %.4f  %s\n", h.entry->id.c_str(),
                  h.score, to_string(h.entry->reflective.cause).c_str());
    std::cout << line;
  }
  return kExitOk;
}

int cmd_memory_distill(const std::string& trace_path,
                       const std::string& bank_path) {
  Trace trace = read_trace(trace_path);
  Scenario scenario = trace.scenario();

  History history;
  for (const auto& h : trace.of_kind("history"))
    history.log(HistoryRecord::from_json(h));
  auto results = trace.of_kind("result");
  if (results.size() != 1) throw TraceError("trace must hold one result");
  SubTaskPlan plan = SubTaskPlan::from_json(results.front().at("plan"));

  GlobalReflectConfig gcfg;
  gcfg.episode_id =
      trace.header.at("scenario_hash").get<std::string>() + "-" +
      std::to_string(
          trace.header.at("config").at("noise").at("seed").get<uint64_t>());
  gcfg.episode_failed =
      results.front().at("status").get<std::string>() == "FAILED";
  auto analysis = global_reflect(history, plan, scenario.instruction, gcfg);

  ExperienceBank bank = load_bank_if_exists(bank_path);
  for (const auto& e : analysis.distilled) bank.store(e);
  bank.persist(bank_path);
  std::cout << analysis.distilled.size() << " entries added\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"master-slave multi-agent grid navigation harness"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_file;

  // ---- run
  auto* run = app.add_subcommand("run", "run a single episode");
  std::string run_scenario;
  run->add_option("--scenario", run_scenario, "scenario JSON file")->required();
  run->add_option("--config", config_file, "JSON config file");
  std::string agents_sel;
  run->add_option("--agents", agents_sel, "scripted|remote");
  uint64_t seed = 0;
  auto* seed_opt = run->add_option("--seed", seed, "noise seed");
  std::string trace_path;
  run->add_option("--trace", trace_path, "trace JSONL output");
  std::string bank_path;
  run->add_option("--bank", bank_path, "experience bank file");
  double tau = 0.8, tau_risk = 0.75, budget_mult = 1.0, dist_noise = 0.0;
  auto* tau_opt = run->add_option("--tau", tau, "verification threshold");
  auto* tau_radius_flag = run->add_flag("--tau-from-radius",
                                        "derive tau from the success radius");
  auto* taur_opt = run->add_option("--tau-risk", tau_risk, "risk threshold");
  auto* bm_opt = run->add_option("--budget-mult", budget_mult,
                                 "budget multiplier");
  auto* glass_flag = run->add_flag("--noise-glass-blind",
                                   "hide glass cells from percepts");
  auto* dn_opt = run->add_option("--noise-dist", dist_noise,
                                 "uniform distance noise amplitude");
  std::vector<std::string> ablate;
  run->add_option("--ablate", ablate, "ablation flags (repeatable)");

  // ---- bench
  auto* bench = app.add_subcommand("bench", "run a benchmark suite");
  std::vector<std::string> bench_scenarios;
  bench->add_option("--scenarios", bench_scenarios,
                    "scenario files or directories")
      ->required();
  bench->add_option("--config", config_file, "JSON config file");
  bench->add_option("--agents", agents_sel, "scripted|remote");
  int repeat = 5, jobs = 1;
  auto* repeat_opt = bench->add_option("--repeat", repeat, "repeats per scenario");
  auto* jobs_opt = bench->add_option("--jobs", jobs, "parallel episodes");
  uint64_t seed_base = 0;
  auto* sb_opt = bench->add_option("--seed-base", seed_base, "noise seed base");
  std::string report_dir, trace_dir;
  bench->add_option("--report", report_dir, "report output directory");
  bench->add_option("--trace-dir", trace_dir, "per-episode trace directory");
  bench->add_option("--bank", bank_path, "experience bank file");
  bench->add_option("--ablate", ablate, "ablation flags (repeatable)");
  auto* b_tau_radius = bench->add_flag("--tau-from-radius",
                                       "derive tau from the success radius");
  auto* b_glass = bench->add_flag("--noise-glass-blind",
                                  "hide glass cells from percepts");
  auto* b_tau = bench->add_option("--tau", tau, "verification threshold");

  // ---- gen
  auto* gen = app.add_subcommand("gen", "generate a scenario");
  uint64_t gen_seed = 0;
  int rows = 8, cols = 8, landmarks = 3, subtasks = 2;
  std::string gen_kind = "random", gen_out;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--rows", rows, "grid rows");
  gen->add_option("--cols", cols, "grid columns");
  gen->add_option("--landmarks", landmarks, "landmark count");
  gen->add_option("--subtasks", subtasks, "sub-task count");
  gen->add_option("--kind", gen_kind, "random|glass|revisit");
  gen->add_option("--out", gen_out, "output path (stdout when omitted)");

  // ---- replay
  auto* replay = app.add_subcommand("replay", "re-simulate a trace");
  std::string replay_trace, render;
  replay->add_option("--trace", replay_trace, "trace JSONL file")->required();
  replay->add_option("--render", render, "ascii");

  // ---- memory
  auto* memory = app.add_subcommand("memory", "experience bank tools");
  memory->require_subcommand(1);
  auto* inspect = memory->add_subcommand("inspect", "query the bank");
  std::string mem_bank, mem_query;
  int mem_top = 5;
  inspect->add_option("--bank", mem_bank, "bank file")->required();
  inspect->add_option("--query", mem_query, "query text")->required();
  inspect->add_option("--top", mem_top, "entries to print");
  auto* distill = memory->add_subcommand("distill", "distill a trace");
  std::string dis_trace, dis_bank;
  distill->add_option("--trace", dis_trace, "trace JSONL file")->required();
  distill->add_option("--bank", dis_bank, "bank file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_file.empty()) cfg.apply_file(config_file);
    if (!agents_sel.empty()) cfg.backend = agents_sel;
    for (const auto& f : ablate) cfg.episode.ablate.set(f);
    if (*seed_opt) cfg.episode.noise.seed = seed;
    if (*tau_opt || *b_tau) cfg.episode.tau = tau;
    if (*tau_radius_flag || *b_tau_radius) cfg.episode.tau_from_radius = true;
    if (*taur_opt) cfg.episode.tau_risk = tau_risk;
    if (*bm_opt) cfg.episode.budget_multiplier = budget_mult;
    if (*glass_flag || *b_glass) cfg.episode.noise.glass_blind = true;
    if (*dn_opt) cfg.episode.noise.distance_noise = dist_noise;
    if (!trace_path.empty()) cfg.trace_path = trace_path;
    if (!trace_dir.empty()) cfg.trace_dir = trace_dir;
    if (!report_dir.empty()) cfg.report_dir = report_dir;
    if (!bank_path.empty()) cfg.bank_path = bank_path;
    if (*repeat_opt) cfg.repeat = repeat;
    if (*jobs_opt) cfg.jobs = jobs;
    if (*sb_opt) cfg.seed_base = seed_base;

    if (run->parsed()) {
      cfg.scenario_paths = {run_scenario};
      cfg.validate();
      return cmd_run(cfg);
    }
    if (bench->parsed()) {
      cfg.scenario_paths = bench_scenarios;
      cfg.validate();
      return cmd_bench(cfg);
    }
    if (gen->parsed())
      return cmd_gen(gen_seed, rows, cols, landmarks, subtasks, gen_kind,
                     gen_out);
    if (replay->parsed()) return cmd_replay(replay_trace, render);
    if (inspect->parsed())
      return cmd_memory_inspect(mem_bank, mem_query, mem_top);
    if (distill->parsed()) return cmd_memory_distill(dis_trace, dis_bank);
  } catch (const EmptyBankError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
