#include "conav/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <functional>
#include <thread>

namespace conav {

double spl(const std::vector<SplRow>& rows) {
  if (rows.empty()) throw EmptyInputError();
  double sum = 0.0;
  for (const auto& r : rows) {
    if (r.success == 0) continue;
    if (r.optimal <= 0.0)
      throw std::invalid_argument("spl: L* must be positive on success rows");
    sum += r.optimal / std::max(r.length, r.optimal);
  }
  return sum / static_cast<double>(rows.size());
}

namespace {

struct TargetSets {
  std::vector<std::string> names;
  std::vector<std::vector<Coordinate>> cells;  // coordinates per target
};

TargetSets target_sets(const Scenario& s) {
  TargetSets t;
  for (const auto& name : s.subtasks) {
    t.names.push_back(name);
    std::vector<Coordinate> coords;
    const Landmark* lm = s.find_landmark(name);
    for (auto gc : lm->cells)
      coords.push_back(Coordinate{s.xc(gc), s.yc(gc)});
    t.cells.push_back(std::move(coords));
  }
  return t;
}

bool within(const Pose& p, const std::vector<Coordinate>& coords,
            double radius) {
  for (const auto& c : coords)
    if (euclid(p.x, p.y, c.x, c.y) <= radius + 1e-9) return true;
  return false;
}

Pose pose_from_json(const json& arr) {
  return Pose{arr.at(0).get<double>(), arr.at(1).get<double>(),
              arr.at(2).get<int>()};
}

}  // namespace

EpisodeMetrics score_episode(const Trace& trace, const Scenario& scenario,
                             double radius) {
  EpisodeMetrics m;
  auto histories = trace.of_kind("history");
  auto results = trace.of_kind("result");
  if (results.size() != 1) throw TraceCorrupt("trace must hold one result");
  const json& result = results.front();
  m.status = result.at("status").get<std::string>();
  m.failure_cause = result.value("cause", "");

  std::vector<HistoryRecord> records;
  for (const auto& h : histories) records.push_back(HistoryRecord::from_json(h));
  Pose final_pose = pose_from_json(result.at("final_pose"));

  m.nl = static_cast<int>(records.size());
  for (const auto& r : records)
    if (r.outcome == StepOutcome::Moved) m.length += scenario.cell_size;

  // Position sequence: pose before each step, then the final pose.
  std::vector<Pose> positions;
  for (const auto& r : records) positions.push_back(r.pose);
  positions.push_back(final_pose);

  TargetSets targets = target_sets(scenario);
  size_t k = 0;
  bool oracle = false;
  for (const auto& p : positions) {
    while (k < targets.cells.size() && within(p, targets.cells[k], radius)) ++k;
    for (const auto& cells : targets.cells)
      if (within(p, cells, radius)) oracle = true;
  }
  m.oracle_success = oracle ? 1 : 0;
  m.success = (k == targets.cells.size() && m.status == "DONE") ? 1 : 0;

  if (!targets.cells.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : targets.cells.back())
      best = std::min(best, euclid(final_pose.x, final_pose.y, c.x, c.y));
    m.ne = best;
  }

  auto lstar = shortest_in_order_path(scenario, radius);
  if (!lstar || *lstar <= 0)
    throw TraceCorrupt("scenario has no positive-length in-order path");
  m.optimal = *lstar;

  // Key decisions.
  for (const auto& kp : scenario.key_points) {
    bool correct = false;
    if (kp.kind == KeyPoint::Kind::Visit) {
      Coordinate c{scenario.xc(kp.cell), scenario.yc(kp.cell)};
      for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].subtask != kp.subtask) continue;
        const Pose& before = records[i].pose;
        const Pose& after =
            i + 1 < records.size() ? records[i + 1].pose : final_pose;
        if (euclid(before.x, before.y, c.x, c.y) <= radius + 1e-9 ||
            euclid(after.x, after.y, c.x, c.y) <= radius + 1e-9) {
          correct = true;
          break;
        }
      }
    } else {
      Pose at{scenario.xc(kp.cell), scenario.yc(kp.cell),
              kp.heading.value_or(0)};
      for (const auto& r : records) {
        if (r.pose == at) {
          correct = kp.action && r.action == *kp.action;
          break;
        }
      }
    }
    m.key_decisions.push_back(correct);
  }

  // Reflection instrumentation.
  m.reflect.checks = result.value("reflect_checks", 0);
  World probe_world(scenario, NoiseConfig{});
  std::map<int, const HistoryRecord*> by_t;
  for (const auto& r : records) by_t[r.t] = &r;

  std::set<int> intervened_subtasks;
  for (const auto& rec : trace.of_kind("reflect")) {
    if (rec.at("stage").get<std::string>() != "local") continue;
    std::string flag = rec.at("flag").get<std::string>();
    if (flag != "conflict" && flag != "risk" && flag != "mismatch") continue;
    ++m.reflect.flagged;
    int sub = rec.value("subtask", 0);
    if (sub > 0) intervened_subtasks.insert(sub);
    if (!rec.contains("action")) continue;
    int t = rec.at("t").get<int>();
    auto it = by_t.find(t);
    if (it == by_t.end()) continue;
    Action vetoed = action_from_string(rec.at("action").get<std::string>());
    if (probe_world.probe(it->second->pose, vetoed) == StepOutcome::Blocked)
      ++m.reflect.confirmed;
  }

  SubTaskPlan final_plan = SubTaskPlan::from_json(result.at("plan"));
  m.reflect.rollbacks = static_cast<int>(intervened_subtasks.size());
  for (int sub : intervened_subtasks) {
    if (sub >= 1 && sub <= static_cast<int>(final_plan.subtasks.size()) &&
        final_plan.subtasks[sub - 1].status == SubTaskStatus::Done)
      ++m.reflect.rollback_success;
  }

  bool failure_class_present = scenario.has_glass();
  for (const auto& rec : trace.of_kind("retrieval")) {
    ++m.reflect.retrievals;
    if (failure_class_present && rec.value("top_has_glass", false))
      ++m.reflect.retrievals_relevant;
  }

  return m;
}

ReflectionAggregate reflection_metrics(
    const std::vector<EpisodeMetrics>& rows) {
  long checks = 0, flagged = 0, confirmed = 0, rollbacks = 0, rb_success = 0,
       retrievals = 0, relevant = 0;
  for (const auto& r : rows) {
    checks += r.reflect.checks;
    flagged += r.reflect.flagged;
    confirmed += r.reflect.confirmed;
    rollbacks += r.reflect.rollbacks;
    rb_success += r.reflect.rollback_success;
    retrievals += r.reflect.retrievals;
    relevant += r.reflect.retrievals_relevant;
  }
  ReflectionAggregate out;
  if (checks > 0) out.edr = 100.0 * flagged / checks;
  if (flagged > 0) out.ra = 100.0 * confirmed / flagged;
  if (rollbacks > 0) out.rsr = 100.0 * rb_success / rollbacks;
  if (retrievals > 0) out.mra = 100.0 * relevant / retrievals;
  return out;
}

namespace {

json metrics_to_json(const EpisodeMetrics& m) {
  json j;
  j["nl"] = m.nl;
  j["ne"] = m.ne;
  j["success"] = m.success;
  j["oracle_success"] = m.oracle_success;
  j["length"] = m.length;
  j["optimal"] = m.optimal;
  json kd = json::array();
  for (bool b : m.key_decisions) kd.push_back(b);
  j["key_decisions"] = kd;
  j["reflect"] = json{{"checks", m.reflect.checks},
                      {"flagged", m.reflect.flagged},
                      {"confirmed", m.reflect.confirmed},
                      {"rollbacks", m.reflect.rollbacks},
                      {"rollback_success", m.reflect.rollback_success},
                      {"retrievals", m.reflect.retrievals},
                      {"retrievals_relevant", m.reflect.retrievals_relevant}};
  j["status"] = m.status;
  j["failure_cause"] = m.failure_cause;
  return j;
}

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("N/A");
}

}  // namespace

json BenchReport::to_json() const {
  json j;
  j["repeats"] = repeats;
  j["ablate"] = ablate.to_json();
  j["config"] = config_echo;
  json rws = json::array();
  for (const auto& r : rows) {
    json rj;
    rj["scenario"] = r.scenario_name;
    rj["hash"] = r.scenario_hash;
    rj["repeat"] = r.repeat;
    rj["metrics"] = metrics_to_json(r.metrics);
    rws.push_back(std::move(rj));
  }
  j["rows"] = rws;
  json agg;
  agg["nl_mean"] = nl_mean;
  agg["ne_mean"] = ne_mean;
  agg["sr_pct"] = sr_pct;
  agg["osr_pct"] = osr_pct;
  agg["spl_pct"] = spl_pct;
  agg["kpa_pct"] = kpa_pct ? json(*kpa_pct) : json(nullptr);
  agg["edr_pct"] = reflection.edr ? json(*reflection.edr) : json(nullptr);
  agg["ra_pct"] = reflection.ra ? json(*reflection.ra) : json(nullptr);
  agg["rsr_pct"] = reflection.rsr ? json(*reflection.rsr) : json(nullptr);
  agg["mra_pct"] = reflection.mra ? json(*reflection.mra) : json(nullptr);
  j["aggregate"] = agg;
  return j;
}

std::string BenchReport::to_text() const {
  std::ostringstream os;
  os << "scenarios: " << rows.size() / std::max(repeats, 1)
     << "  repeats: " << repeats << "  episodes: " << rows.size() << "\n\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %-12s %-8s %-8s %-8s %-8s\n",
                "NL (Steps)", "NE (Meters)", "SR (%)", "OSR (%)", "SPL (%)",
                "KPA (%)");
  os << line;
  std::snprintf(line, sizeof(line), "%-12s %-12s %-8s %-8s %-8s %-8s\n",
                fmt(nl_mean).c_str(), fmt(ne_mean).c_str(), fmt(sr_pct).c_str(),
                fmt(osr_pct).c_str(), fmt(spl_pct).c_str(),
                (kpa_pct ? fmt(*kpa_pct) : std::string("N/A")).c_str());
  os << line << "\n";
  std::snprintf(line, sizeof(line), "%-8s %-8s %-8s %-8s\n", "EDR (%)",
                "RA (%)", "RSR (%)", "MRA (%)");
  os << line;
  std::snprintf(line, sizeof(line), "%-8s %-8s %-8s %-8s\n",
                fmt_opt(reflection.edr).c_str(), fmt_opt(reflection.ra).c_str(),
                fmt_opt(reflection.rsr).c_str(),
                fmt_opt(reflection.mra).c_str());
  os << line;
  return os.str();
}

BenchReport run_bench(const std::vector<NamedScenario>& scenarios,
                      const BackendFactory& make_backends,
                      const BenchOptions& options,
                      ExperienceBank* out_bank) {
  if (scenarios.empty()) throw ConfigError("bench needs at least one scenario");
  if (options.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (options.jobs < 1) throw ConfigError("jobs must be >= 1");
  options.config.validate();

  struct Job {
    const NamedScenario* sc;
    int repeat;
  };
  std::vector<Job> jobs;
  for (const auto& sc : scenarios)
    for (int r = 0; r < options.repeats; ++r) jobs.push_back({&sc, r});

  std::vector<BenchRow> rows(jobs.size());
  std::vector<std::vector<ExperienceEntry>> distilled(jobs.size());

  auto run_one = [&](size_t i) {
    const Job& job = jobs[i];
    EpisodeConfig ec = options.config;
    ec.noise.seed = options.seed_base + static_cast<uint64_t>(job.repeat);
    std::string trace_path;
    if (!options.trace_dir.empty()) {
      trace_path = options.trace_dir + "/" + job.sc->name + "_r" +
                   std::to_string(job.repeat) + ".jsonl";
    }
    TraceWriter writer =
        trace_path.empty() ? TraceWriter{} : TraceWriter{trace_path};
    Backends backends = make_backends();
    EpisodeResult res = run_episode(job.sc->scenario, backends, ec, writer,
                                    options.initial_bank);
    distilled[i] = res.distilled;
    BenchRow row;
    row.scenario_name = job.sc->name;
    row.scenario_hash = scenario_hash(job.sc->scenario);
    row.repeat = job.repeat;
    row.metrics = score_episode(trace_from_records(writer.records()),
                                job.sc->scenario, options.config.radius);
    rows[i] = std::move(row);
  };

  if (options.jobs == 1) {
    for (size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int w = 0; w < options.jobs; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          run_one(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  if (out_bank) {
    for (const auto& batch : distilled)
      for (const auto& e : batch) out_bank->store(e);
  }

  BenchReport report;
  report.rows = std::move(rows);
  report.repeats = options.repeats;
  report.ablate = options.config.ablate;
  report.config_echo = options.config.to_json();

  std::vector<EpisodeMetrics> ms;
  std::vector<SplRow> spl_rows;
  double nl_sum = 0, ne_sum = 0;
  int s_sum = 0, os_sum = 0;
  long kd_total = 0, kd_correct = 0;
  for (const auto& r : report.rows) {
    ms.push_back(r.metrics);
    spl_rows.push_back(
        SplRow{r.metrics.success, r.metrics.length, r.metrics.optimal});
    nl_sum += r.metrics.nl;
    ne_sum += r.metrics.ne;
    s_sum += r.metrics.success;
    os_sum += r.metrics.oracle_success;
    for (bool b : r.metrics.key_decisions) {
      ++kd_total;
      if (b) ++kd_correct;
    }
  }
  const double n = static_cast<double>(report.rows.size());
  report.nl_mean = nl_sum / n;
  report.ne_mean = ne_sum / n;
  report.sr_pct = 100.0 * s_sum / n;
  report.osr_pct = 100.0 * os_sum / n;
  report.spl_pct = 100.0 * spl(spl_rows);
  if (kd_total > 0) report.kpa_pct = 100.0 * kd_correct / kd_total;
  report.reflection = reflection_metrics(ms);

  if (report.spl_pct > report.sr_pct + 1e-9)
    throw std::logic_error("aggregate invariant violated: SPL > SR");
  if (report.osr_pct + 1e-9 < report.sr_pct)
    throw std::logic_error("aggregate invariant violated: OSR < SR");
  return report;
}

// ---------------------------------------------------------------------------

void replay_transitions(const Trace& trace) {
  MasterState state;
  auto results = trace.of_kind("result");
  if (results.size() != 1) throw TraceCorrupt("trace must hold one result");
  const json& result = results.front();
  std::string cause = result.value("cause", "");

  size_t plan_size = 0;
  const std::vector<json>& recs = trace.records;

  auto next_envelope_type = [&](size_t from) -> std::string {
    for (size_t i = from; i < recs.size(); ++i) {
      if (recs[i].at("kind").get<std::string>() != "envelope") continue;
      return recs[i].at("type").get<std::string>();
    }
    return "";
  };

  for (size_t i = 0; i < recs.size(); ++i) {
    const json& r = recs[i];
    if (r.at("kind").get<std::string>() != "envelope") continue;
    std::string type = r.at("type").get<std::string>();
    if (type == "PlanReply") {
      plan_size = r.at("payload").at("subtasks").size();
      state = transition(state, {plan_size == 0 ? Event::Kind::PlanEmpty
                                                : Event::Kind::PlanOk});
    } else if (type == "ObserveReply") {
      state = transition(state, {Event::Kind::ObserveReply});
    } else if (type == "ActReply") {
      const json& payload = r.at("payload");
      bool failed_act = payload.value("deadlock", false);
      if (!failed_act) {
        // a mismatch routes to REFLECTION; visible as a following notice
        failed_act = next_envelope_type(i + 1) == "ReflectNotice";
      }
      state = transition(state, {failed_act ? Event::Kind::ActFail
                                            : Event::Kind::ActSuccess});
      if (!failed_act) {
        std::string nxt = next_envelope_type(i + 1);
        if (nxt == "ObserveRequest") {
          // evaluation skipped by evaluate_every_n
          state = transition(state, {Event::Kind::VerifyNotDone});
        }
      }
    } else if (type == "ReflectNotice") {
      state = transition(state, {Event::Kind::ReflectResume});
    } else if (type == "VerifyReply") {
      bool done = r.at("payload").at("done").get<bool>();
      if (done) {
        bool last = state.current_index >= static_cast<int>(plan_size);
        state = transition(state, {Event::Kind::VerifyDone, last});
      } else {
        state = transition(state, {Event::Kind::VerifyNotDone});
      }
    }
  }

  std::string status = result.at("status").get<std::string>();
  if (status == "FAILED" && state.phase != MasterPhase::Failed) {
    Event::Kind k = cause == "budget" ? Event::Kind::BudgetExhausted
                                      : Event::Kind::Abort;
    state = transition(state, {k});
  }
  if (status == "DONE" && state.phase != MasterPhase::Done)
    throw TraceCorrupt("replay did not reach DONE");
  if (status == "FAILED" && state.phase != MasterPhase::Failed)
    throw TraceCorrupt("replay did not reach FAILED");
}

bool replay_matches(const Trace& trace) {
  Scenario scenario = trace.scenario();
  const json& cfgj = trace.header.at("config");
  NoiseConfig noise;
  noise.glass_blind = cfgj.at("noise").at("glass_blind").get<bool>();
  noise.distance_noise = cfgj.at("noise").at("distance_noise").get<double>();
  noise.seed = cfgj.at("noise").at("seed").get<uint64_t>();

  World world(scenario, noise);
  auto results = trace.of_kind("result");
  if (results.size() != 1) throw TraceCorrupt("trace must hold one result");

  for (const auto& h : trace.of_kind("history")) {
    HistoryRecord rec = HistoryRecord::from_json(h);
    if (!(world.pose() == rec.pose)) return false;
    StepResult res = world.step(rec.action);
    if (res.outcome != rec.outcome) return false;
  }
  Pose final_pose = pose_from_json(results.front().at("final_pose"));
  return world.pose() == final_pose;
}

}  // namespace conav
