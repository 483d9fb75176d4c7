#include "conav/orchestrator.hpp"

#include <algorithm>
#include <cmath>

namespace conav {

std::string to_string(MasterPhase p) {
  switch (p) {
    case MasterPhase::Planning: return "PLANNING";
    case MasterPhase::Perception: return "PERCEPTION";
    case MasterPhase::Action: return "ACTION";
    case MasterPhase::Evaluation: return "EVALUATION";
    case MasterPhase::Reflection: return "REFLECTION";
    case MasterPhase::Done: return "DONE";
    case MasterPhase::Failed: return "FAILED";
  }
  throw std::logic_error("unknown MasterPhase");
}

MasterPhase phase_from_string(const std::string& s) {
  if (s == "PLANNING") return MasterPhase::Planning;
  if (s == "PERCEPTION") return MasterPhase::Perception;
  if (s == "ACTION") return MasterPhase::Action;
  if (s == "EVALUATION") return MasterPhase::Evaluation;
  if (s == "REFLECTION") return MasterPhase::Reflection;
  if (s == "DONE") return MasterPhase::Done;
  if (s == "FAILED") return MasterPhase::Failed;
  throw std::invalid_argument("not a phase: " + s);
}

std::string to_string(Event::Kind k) {
  switch (k) {
    case Event::Kind::PlanOk: return "plan-ok";
    case Event::Kind::PlanEmpty: return "plan-empty";
    case Event::Kind::ObserveReply: return "observe-reply";
    case Event::Kind::ActSuccess: return "act-success";
    case Event::Kind::ActFail: return "act-fail";
    case Event::Kind::ReflectResume: return "reflect-resume";
    case Event::Kind::VerifyDone: return "verify-done";
    case Event::Kind::VerifyNotDone: return "verify-not-done";
    case Event::Kind::BudgetExhausted: return "budget-exhausted";
    case Event::Kind::Abort: return "abort";
  }
  throw std::logic_error("unknown Event::Kind");
}

MasterState transition(const MasterState& state, const Event& event) {
  MasterState next = state;
  if (event.kind == Event::Kind::BudgetExhausted ||
      event.kind == Event::Kind::Abort) {
    if (state.phase == MasterPhase::Done || state.phase == MasterPhase::Failed)
      throw IllegalTransition("abort after episode end");
    next.phase = MasterPhase::Failed;
    return next;
  }
  switch (state.phase) {
    case MasterPhase::Planning:
      if (event.kind == Event::Kind::PlanOk) {
        next.phase = MasterPhase::Perception;
        next.current_index = 1;
        return next;
      }
      if (event.kind == Event::Kind::PlanEmpty) {
        next.phase = MasterPhase::Failed;
        return next;
      }
      break;
    case MasterPhase::Perception:
      if (event.kind == Event::Kind::ObserveReply) {
        next.phase = MasterPhase::Action;
        return next;
      }
      break;
    case MasterPhase::Action:
      if (event.kind == Event::Kind::ActSuccess) {
        next.phase = MasterPhase::Evaluation;
        return next;
      }
      if (event.kind == Event::Kind::ActFail) {
        next.phase = MasterPhase::Reflection;
        return next;
      }
      break;
    case MasterPhase::Reflection:
      if (event.kind == Event::Kind::ReflectResume) {
        next.phase = MasterPhase::Perception;
        return next;
      }
      break;
    case MasterPhase::Evaluation:
      if (event.kind == Event::Kind::VerifyDone) {
        if (event.last_subtask) {
          next.phase = MasterPhase::Done;
        } else {
          next.phase = MasterPhase::Perception;
          next.current_index = state.current_index + 1;
        }
        return next;
      }
      if (event.kind == Event::Kind::VerifyNotDone) {
        next.phase = MasterPhase::Perception;
        return next;
      }
      break;
    case MasterPhase::Done:
    case MasterPhase::Failed:
      break;
  }
  throw IllegalTransition("event " + to_string(event.kind) +
                          " illegal in phase " + to_string(state.phase));
}

Backends scripted_backends() {
  return Backends{std::make_shared<ScriptedPlanner>(),
                  std::make_shared<ScriptedObserver>(),
                  std::make_shared<ScriptedController>()};
}

json AblationFlags::to_json() const {
  return json{{"no_planner", no_planner},     {"no_observer", no_observer},
              {"no_memory", no_memory},       {"no_reflection", no_reflection},
              {"no_geo_map", no_geo_map},     {"no_topo_map", no_topo_map}};
}

AblationFlags AblationFlags::from_json(const json& j) {
  AblationFlags f;
  f.no_planner = j.value("no_planner", false);
  f.no_observer = j.value("no_observer", false);
  f.no_memory = j.value("no_memory", false);
  f.no_reflection = j.value("no_reflection", false);
  f.no_geo_map = j.value("no_geo_map", false);
  f.no_topo_map = j.value("no_topo_map", false);
  return f;
}

void AblationFlags::set(const std::string& name) {
  if (name == "no_planner") no_planner = true;
  else if (name == "no_observer") no_observer = true;
  else if (name == "no_memory") no_memory = true;
  else if (name == "no_reflection") no_reflection = true;
  else if (name == "no_geo_map") no_geo_map = true;
  else if (name == "no_topo_map") no_topo_map = true;
  else throw ConfigError("unknown ablation flag '" + name + "'");
}

json EpisodeConfig::to_json() const {
  json j;
  j["tau"] = tau;
  j["tau_from_radius"] = tau_from_radius;
  j["tau_risk"] = tau_risk;
  j["delta"] = delta;
  j["budget_multiplier"] = budget_multiplier;
  j["evaluate_every_n"] = evaluate_every_n;
  j["history_window"] = history_window;
  j["view_range_cells"] = view_range_cells;
  j["radius"] = radius;
  j["noise"] = json{{"glass_blind", noise.glass_blind},
                    {"distance_noise", noise.distance_noise},
                    {"seed", noise.seed}};
  j["ablate"] = ablate.to_json();
  j["full_maps"] = full_maps;
  j["stagnation_window"] = stagnation_window;
  j["oscillation_window"] = oscillation_window;
  return j;
}

void EpisodeConfig::validate() const {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must lie in [0, 1]");
  if (tau_risk < 0.0 || tau_risk > 1.0)
    throw ConfigError("tau_risk must lie in [0, 1]");
  if (delta < 0.0) throw ConfigError("delta must be >= 0");
  if (budget_multiplier <= 0.0)
    throw ConfigError("budget_multiplier must be positive");
  if (evaluate_every_n < 1) throw ConfigError("evaluate_every_n must be >= 1");
  if (history_window < 1) throw ConfigError("history_window must be >= 1");
  if (view_range_cells < 1) throw ConfigError("view_range_cells must be >= 1");
  if (radius <= 0.0) throw ConfigError("radius must be positive");
  if (noise.distance_noise < 0.0)
    throw ConfigError("distance_noise must be >= 0");
  if (stagnation_window < 2) throw ConfigError("stagnation_window must be >= 2");
  if (oscillation_window < 2)
    throw ConfigError("oscillation_window must be >= 2");
}

json percept_to_json(const PerceptTuple& p) {
  auto entries = [](const std::vector<PerceptEntry>& es) {
    json arr = json::array();
    for (const auto& e : es)
      arr.push_back(json{{"name", e.name},
                         {"bearing", e.bearing},
                         {"distance", e.distance}});
    return arr;
  };
  json j;
  j["view"] = to_string(p.view);
  j["obstacles"] = entries(p.obstacles);
  j["landmarks"] = entries(p.landmarks);
  j["traversability"] = json{{"walkable", p.traversability.walkable},
                             {"free_range", p.traversability.free_range}};
  j["context"] = p.context;
  return j;
}

PerceptTuple percept_from_json(const json& j) {
  auto entries = [](const json& arr) {
    std::vector<PerceptEntry> es;
    for (const auto& e : arr)
      es.push_back(PerceptEntry{e.at("name").get<std::string>(),
                                e.at("bearing").get<double>(),
                                e.at("distance").get<double>()});
    return es;
  };
  PerceptTuple p;
  p.view = view_from_string(j.at("view").get<std::string>());
  p.obstacles = entries(j.at("obstacles"));
  p.landmarks = entries(j.at("landmarks"));
  p.traversability =
      Traversability{j.at("traversability").at("walkable").get<bool>(),
                     j.at("traversability").at("free_range").get<double>()};
  p.context = j.at("context").get<std::string>();
  return p;
}

// ---------------------------------------------------------------------------

namespace {

struct EpisodeRun {
  const Scenario& scenario;
  const Backends& backends;
  const EpisodeConfig& cfg;
  TraceWriter& trace;
  const ExperienceBank* bank;

  World world;
  AgentMap map;
  History history;
  LocalReflector reflector;
  ExperienceBank empty_bank;
  MasterState state;
  EnvDescription env;
  double delta;
  double tau;
  VerifyContext vctx;
  PlanContext pctx;
  int seq = 0;
  bool deadlock_pending = false;
  std::vector<ReflectionEvent> pending_events;
  std::string last_digest;
  HistoryRecord pending_record;
  bool has_pending_record = false;
  std::string failure_cause;

  EpisodeRun(const Scenario& s, const Backends& b, const EpisodeConfig& c,
             TraceWriter& t, const ExperienceBank* bk)
      : scenario(s),
        backends(b),
        cfg(c),
        trace(t),
        bank(bk),
        world(s, c.noise),
        reflector(c.tau_risk, c.delta > 0 ? c.delta : s.cell_size) {
    world.view_range_cells = cfg.view_range_cells;
    delta = cfg.delta > 0 ? cfg.delta : scenario.cell_size;
    tau = cfg.tau_from_radius
              ? std::clamp(1.0 - cfg.radius / scenario.diameter() - 1e-9, 0.0,
                           1.0)
              : cfg.tau;
    for (const auto& lm : scenario.landmarks) {
      pctx.lexicon.push_back(lm.name);
      std::vector<Coordinate> coords;
      for (auto gc : lm.cells)
        coords.push_back(Coordinate{scenario.xc(gc), scenario.yc(gc)});
      vctx.landmark_coords[lm.name] = std::move(coords);
    }
    vctx.d_norm = scenario.diameter();
    map.record_pose(scenario.start);
  }

  bool reflection_on() const { return !cfg.ablate.no_reflection; }
  bool memory_on() const { return !cfg.ablate.no_memory; }
  const ExperienceBank& active_bank() const {
    return (memory_on() && bank) ? *bank : empty_bank;
  }

  void envelope(const std::string& from, const std::string& to,
                const std::string& type, json payload) {
    json j;
    j["kind"] = "envelope";
    j["seq"] = ++seq;
    j["t"] = state.step;
    j["from"] = from;
    j["to"] = to;
    j["phase"] = to_string(state.phase);
    j["type"] = type;
    j["payload"] = std::move(payload);
    trace.record(std::move(j));
  }

  void reflect_line(const ReflectionEvent& ev, int t) {
    json j;
    j["kind"] = "reflect";
    j["t"] = t;
    j["stage"] = ev.stage;
    j["flag"] = ev.flag;
    j["reason"] = ev.reason;
    j["matched_id"] = ev.matched_id ? json(*ev.matched_id) : json(nullptr);
    j["similarity"] = ev.similarity ? json(*ev.similarity) : json(nullptr);
    if (ev.action) j["action"] = *ev.action;
    if (ev.replacement) j["replacement"] = *ev.replacement;
    j["subtask"] = ev.subtask;
    trace.record(std::move(j));
  }

  void log_record(HistoryRecord rec) {
    for (const auto& ev : rec.reflection_events) reflect_line(ev, rec.t);
    json j;
    j["kind"] = "history";
    j.update(rec.to_json());
    if (cfg.full_maps) j["map"] = map.snapshot();
    trace.record(std::move(j));
    history.log(std::move(rec));
  }

  void seal_pending() {
    if (!has_pending_record) return;
    has_pending_record = false;
    log_record(std::move(pending_record));
    pending_record = HistoryRecord{};
  }

  void log_retrieval(const LocalVerdict& verdict) {
    json j;
    j["kind"] = "retrieval";
    j["t"] = state.step;
    j["top_id"] = *verdict.retrieved_id;
    j["score"] = *verdict.retrieved_score;
    for (const auto& e : active_bank().entries()) {
      if (e.id != *verdict.retrieved_id) continue;
      j["top_cause"] = to_string(e.reflective.cause);
      bool has_glass = e.features.count("glass") > 0;
      for (const auto& tok : e.reflective.f_err_tokens)
        if (tok == "glass") has_glass = true;
      j["top_has_glass"] = has_glass;
      break;
    }
    trace.record(std::move(j));
  }

  ReflectionEvent make_event(const std::string& flag,
                             const std::string& reason) {
    ReflectionEvent ev;
    ev.stage = "local";
    ev.flag = flag;
    ev.reason = reason;
    ev.subtask = state.current_index;
    return ev;
  }

  const SubTask& active_subtask() const {
    static const SubTask terminal{0, "episode complete", "",
                                  SubTaskStatus::Done};
    const SubTask* st = state.plan.active();
    return st ? *st : terminal;
  }

  // Fails the episode out of the ACTION phase for deadlocks that survived
  // one reflection detour.
  bool fail_from_action(const std::string& cause) {
    failure_cause = cause;
    state = transition(state, {Event::Kind::Abort});
    return false;
  }

  void do_planning() {
    envelope("master", "planner", "PlanRequest",
             json{{"instruction", scenario.instruction},
                  {"lexicon", pctx.lexicon}});
    SubTaskPlan plan;
    if (cfg.ablate.no_planner) {
      SubTask st;
      st.index = 1;
      st.description = scenario.instruction;
      st.target = "";
      st.status = SubTaskStatus::Active;
      plan.instruction = scenario.instruction;
      plan.subtasks.push_back(std::move(st));
    } else {
      plan = backends.planner->plan(scenario.instruction, pctx);
    }
    envelope("planner", "master", "PlanReply", plan.to_json());
    state.plan = std::move(plan);
    state = transition(state, {Event::Kind::PlanOk});
  }

  void do_perception() {
    auto views = world.perceive();
    const SubTask& st = active_subtask();
    json percepts = json::array();
    for (const auto& v : views) percepts.push_back(percept_to_json(v));
    envelope("master", "observer", "ObserveRequest",
             json{{"subtask", st.target.empty() ? st.description : st.target},
                  {"percepts", percepts}});
    if (cfg.ablate.no_observer) {
      env = EnvDescription{};
      env.raw_views = views;
      for (auto v : kAllViews) {
        env.summaries[static_cast<int>(v)] = "";
        if (views[static_cast<int>(v)].traversability.walkable)
          env.traversable_dirs.insert(v);
      }
    } else {
      env = backends.observer->observe(views, st);
    }
    if (reflection_on()) env = reflector.sanitize(env, world.pose());
    last_digest = env.digest();
    envelope("observer", "master", "ObserveReply", env.to_json());
    state = transition(state, {Event::Kind::ObserveReply});
  }

  // Candidate registration and percept-confirmed edges happen before the
  // decision so the controller sees its own surroundings; the movement edge
  // lands after execution.
  void map_update_pre_decide(const Pose& at, const EnvDescription& raw_env) {
    if (cfg.ablate.no_geo_map) return;
    NodeId cur = map.register_node(Coordinate{at.x, at.y});
    auto cand_ids = map.register_candidates(at, delta);
    if (cfg.ablate.no_topo_map) return;
    for (auto v : kAllViews) {
      const auto& t = raw_env.raw_views[static_cast<int>(v)].traversability;
      if (t.free_range >= delta - 1e-9)
        map.topo.connect(cur, cand_ids[static_cast<int>(v)]);
    }
  }

  void map_update_post_act(const Pose& before, const StepResult& res) {
    if (!cfg.ablate.no_geo_map && !cfg.ablate.no_topo_map &&
        res.outcome == StepOutcome::Moved) {
      NodeId cur = map.register_node(Coordinate{before.x, before.y});
      NodeId there = map.register_node(Coordinate{res.pose.x, res.pose.y});
      if (there != cur) map.topo.connect(cur, there);
    }
    map.record_pose(res.pose);
  }

  bool handle_deadlock(const std::string& reason) {
    auto ev = make_event("deadlock", reason);
    reflect_line(ev, state.step);
    pending_events.push_back(std::move(ev));
    envelope("controller", "master", "ActReply", json{{"deadlock", true}});
    if (deadlock_pending) return fail_from_action("deadlock");
    deadlock_pending = true;
    state = transition(state, {Event::Kind::ActFail});
    return true;
  }

  bool do_action() {
    if (state.step >= state.budget) {
      failure_cause = "budget";
      state = transition(state, {Event::Kind::BudgetExhausted});
      return false;
    }
    const SubTask& st = active_subtask();
    envelope("master", "controller", "ActRequest",
             json{{"subtask", st.target.empty() ? st.description : st.target},
                  {"env_digest", env.digest()},
                  {"map_ref", state.step}});

    map_update_pre_decide(world.pose(), env);

    DecideContext dctx;
    dctx.delta = delta;
    dctx.use_topo = !cfg.ablate.no_topo_map && !cfg.ablate.no_geo_map;
    dctx.use_geo = !cfg.ablate.no_geo_map;

    Decision decision;
    try {
      decision = backends.controller->decide(
          st, env, map, history.window(cfg.history_window), state.plan, dctx);
    } catch (const DeadlockSignal&) {
      return handle_deadlock("no traversable direction");
    }

    Action final_action = decision.action;
    std::vector<ReflectionEvent> events = std::move(pending_events);
    pending_events.clear();

    if (reflection_on()) {
      LocalVerdict verdict =
          reflector.local_check(decision.action, env, map, st, active_bank());
      if (verdict.retrieved_id) log_retrieval(verdict);
      if (verdict.flag != VerdictFlag::Pass) {
        auto ev = make_event(to_string(verdict.flag), verdict.reason);
        ev.matched_id = verdict.matched_id;
        ev.similarity = verdict.similarity;
        ev.action = to_string(decision.action);
        try {
          final_action = reflector.micro_plan(verdict, env, decision.action,
                                              active_bank());
          ev.replacement = to_string(final_action);
          events.push_back(std::move(ev));
        } catch (const NoAlternativeError&) {
          events.push_back(std::move(ev));
          pending_events = std::move(events);
          return handle_deadlock("veto without alternative");
        }
      }
    }

    deadlock_pending = false;
    StepOutcome expected = expected_outcome(final_action, env);
    Pose before = world.pose();
    StepResult res = world.step(final_action);
    state.step += 1;

    bool mismatched = false;
    if (reflection_on() && LocalReflector::mismatch(expected, res.outcome)) {
      mismatched = true;
      reflector.record_mismatch(before, final_action);
      auto ev =
          make_event("mismatch", "expected movement but the world blocked it");
      ev.action = to_string(final_action);
      events.push_back(std::move(ev));
    }

    map_update_post_act(before, res);

    envelope("controller", "master", "ActReply",
             json{{"decision", decision.to_json()},
                  {"final_action", to_string(final_action)},
                  {"outcome", to_string(res.outcome)}});

    HistoryRecord rec;
    rec.t = state.step - 1;
    rec.pose = before;
    rec.action = final_action;
    rec.outcome = res.outcome;
    rec.observation = last_digest;
    rec.map_ref = rec.t;
    rec.reflection_events = std::move(events);
    rec.subtask = state.current_index;

    if (mismatched) {
      log_record(std::move(rec));
      state = transition(state, {Event::Kind::ActFail});
    } else {
      // Held open so the evaluation can attach a completion event.
      pending_record = std::move(rec);
      has_pending_record = true;
      state = transition(state, {Event::Kind::ActSuccess});
    }
    return true;
  }

  void do_reflection() {
    envelope("master", "memory", "ReflectNotice",
             json{{"note", "re-deciding after reflection"}});
    state = transition(state, {Event::Kind::ReflectResume});
  }

  void do_evaluation() {
    bool should_verify = cfg.evaluate_every_n <= 1 ||
                         (state.step % cfg.evaluate_every_n) == 0;
    bool done = false;
    if (should_verify) {
      const SubTask& st = active_subtask();
      envelope("master", "planner", "VerifyRequest",
               json{{"subtask", st.target.empty() ? st.description : st.target},
                    {"pose", json::array({world.pose().x, world.pose().y,
                                          world.pose().heading})},
                    {"tau", tau}});
      std::vector<const ExperienceEntry*> advisory;
      VerifyResult vr = backends.planner->verify(
          st, env, history.window(cfg.history_window), world.pose(), tau, vctx,
          advisory);
      envelope("planner", "master", "VerifyReply",
               json{{"done", vr.done}, {"progress", vr.progress}});
      done = vr.done;
    }
    if (done) {
      bool last =
          state.current_index >= static_cast<int>(state.plan.subtasks.size());
      if (has_pending_record) {
        auto ev = make_event("subtask_done",
                             "sub-task " + std::to_string(state.current_index) +
                                 " verified complete");
        pending_record.reflection_events.push_back(std::move(ev));
      }
      state.plan.advance();
      seal_pending();
      state = transition(state, {Event::Kind::VerifyDone, last});
    } else {
      seal_pending();
      state = transition(state, {Event::Kind::VerifyNotDone});
    }
  }

  EpisodeResult finish(EpisodeStatus status, const std::string& cause) {
    seal_pending();
    if (status == EpisodeStatus::Done && !world.finished()) {
      StepResult res = world.step(Action::Stop);
      HistoryRecord rec;
      rec.t = state.step;
      rec.pose = res.pose;
      rec.action = Action::Stop;
      rec.outcome = res.outcome;
      rec.observation = last_digest;
      rec.map_ref = rec.t;
      rec.subtask = state.current_index;
      state.step += 1;
      map.record_pose(res.pose);
      log_record(std::move(rec));
    }

    EpisodeResult result;
    result.status = status;
    result.failure_cause = cause;
    result.final_pose = world.pose();
    result.reflect_checks = reflector.checks_performed();
    result.reflect_retrievals = reflector.retrievals_performed();
    result.episode_id =
        scenario_hash(scenario) + "-" + std::to_string(cfg.noise.seed);

    if (reflection_on() && !history.empty()) {
      GlobalReflectConfig gcfg;
      gcfg.stagnation_window = cfg.stagnation_window;
      gcfg.oscillation_window = cfg.oscillation_window;
      gcfg.episode_id = result.episode_id;
      gcfg.episode_failed = status == EpisodeStatus::Failed;
      auto analysis =
          global_reflect(history, state.plan, scenario.instruction, gcfg);
      for (const auto& seg : analysis.segments) {
        json j;
        j["kind"] = "reflect";
        j["t"] = seg.start_t;
        j["stage"] = "global";
        j["flag"] = to_string(seg.label);
        j["reason"] = "segment [" + std::to_string(seg.start_t) + ", " +
                      std::to_string(seg.end_t) + "]";
        j["matched_id"] = nullptr;
        j["similarity"] = nullptr;
        trace.record(std::move(j));
      }
      result.distilled = std::move(analysis.distilled);
    }

    json j;
    j["kind"] = "result";
    j["status"] = status == EpisodeStatus::Done ? "DONE" : "FAILED";
    j["cause"] = cause;
    j["steps"] = state.step;
    j["final_pose"] =
        json::array({world.pose().x, world.pose().y, world.pose().heading});
    j["plan"] = state.plan.to_json();
    j["reflect_checks"] = result.reflect_checks;
    j["reflect_retrievals"] = result.reflect_retrievals;
    j["distilled"] = static_cast<int>(result.distilled.size());
    j["map"] = map.snapshot();
    trace.record(std::move(j));
    trace.flush();

    result.final_state = state;
    result.history = std::move(history);
    return result;
  }

  EpisodeResult run() {
    state.budget = static_cast<int>(
        std::floor(scenario.step_budget * cfg.budget_multiplier));
    trace.header(conav::to_json(scenario), cfg.to_json(),
                 scenario_hash(scenario));

    if (state.budget <= 0) {
      state = transition(state, {Event::Kind::BudgetExhausted});
      return finish(EpisodeStatus::Failed, "budget");
    }

    try {
      do_planning();
    } catch (const PlanEmptyError&) {
      state = transition(state, {Event::Kind::PlanEmpty});
      return finish(EpisodeStatus::Failed, "plan-empty");
    } catch (const BackendUnavailable& e) {
      state = transition(state, {Event::Kind::Abort});
      return finish(EpisodeStatus::Failed, std::string("backend: ") + e.what());
    }

    try {
      while (true) {
        switch (state.phase) {
          case MasterPhase::Perception: do_perception(); break;
          case MasterPhase::Action:
            if (!do_action()) return finish(EpisodeStatus::Failed,
                                            failure_cause);
            break;
          case MasterPhase::Reflection: do_reflection(); break;
          case MasterPhase::Evaluation: do_evaluation(); break;
          case MasterPhase::Done: return finish(EpisodeStatus::Done, "");
          default:
            throw IllegalTransition("episode loop entered " +
                                    to_string(state.phase));
        }
      }
    } catch (const BackendUnavailable& e) {
      state = transition(state, {Event::Kind::Abort});
      return finish(EpisodeStatus::Failed, std::string("backend: ") + e.what());
    }
  }
};

}  // namespace

EpisodeResult run_episode(const Scenario& scenario, const Backends& backends,
                          const EpisodeConfig& config, TraceWriter& trace,
                          const ExperienceBank* bank) {
  config.validate();
  scenario.validate();
  if (!backends.planner || !backends.observer || !backends.controller)
    throw ConfigError("all agent roles need a backend");
  EpisodeRun run(scenario, backends, config, trace, bank);
  return run.run();
}

}  // namespace conav
