#pragma once

#include <memory>
#include <string>

#include "conav/agents.hpp"
#include "conav/memory.hpp"
#include "conav/reflection.hpp"
#include "conav/trace.hpp"
#include "conav/world.hpp"

namespace conav {

enum class MasterPhase {
  Planning,
  Perception,
  Action,
  Evaluation,
  Reflection,
  Done,
  Failed
};

std::string to_string(MasterPhase p);
MasterPhase phase_from_string(const std::string& s);

struct MasterState {
  MasterPhase phase = MasterPhase::Planning;
  SubTaskPlan plan;
  int current_index = 0;  // 1-based active sub-task; 0 before planning
  int step = 0;           // executed world steps
  int budget = 0;
};

struct Event {
  enum class Kind {
    PlanOk,
    PlanEmpty,
    ObserveReply,
    ActSuccess,
    ActFail,
    ReflectResume,
    VerifyDone,
    VerifyNotDone,
    BudgetExhausted,
    Abort  // deadlock or backend failure
  };
  Kind kind = Kind::PlanOk;
  bool last_subtask = false;  // VerifyDone only
};

std::string to_string(Event::Kind k);

struct IllegalTransition : std::logic_error {
  using std::logic_error::logic_error;
};

// The master policy as a pure transition table.
MasterState transition(const MasterState& state, const Event& event);

struct Backends {
  std::shared_ptr<PlannerBackend> planner;
  std::shared_ptr<ObserverBackend> observer;
  std::shared_ptr<ControllerBackend> controller;
};

Backends scripted_backends();

struct AblationFlags {
  bool no_planner = false;
  bool no_observer = false;
  bool no_memory = false;
  bool no_reflection = false;
  bool no_geo_map = false;
  bool no_topo_map = false;

  json to_json() const;
  static AblationFlags from_json(const json& j);
  // Parses a single flag name ("no_planner", ...); throws on unknown names.
  void set(const std::string& name);
};

struct EpisodeConfig {
  double tau = 0.8;
  bool tau_from_radius = false;  // derive tau so done <=> within radius
  double tau_risk = 0.75;
  double delta = 0.0;            // 0 means cell_size
  double budget_multiplier = 1.0;
  int evaluate_every_n = 1;
  int history_window = 10;
  int view_range_cells = 5;
  double radius = 1.0;
  NoiseConfig noise;
  AblationFlags ablate;
  bool full_maps = false;
  int stagnation_window = 6;
  int oscillation_window = 4;

  json to_json() const;
  void validate() const;  // throws ConfigError
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EpisodeStatus { Done, Failed };

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Failed;
  std::string failure_cause;  // "budget", "plan-empty", "deadlock", "backend: ..."
  MasterState final_state;
  History history;
  Pose final_pose;
  std::vector<ExperienceEntry> distilled;
  int reflect_checks = 0;
  int reflect_retrievals = 0;
  std::string episode_id;
};

// Runs one full episode: PLANNING once, then the
// PERCEPTION -> ACTION -> EVALUATION loop with REFLECTION detours, until
// DONE, FAILED(budget) or a repeated deadlock. Writes the trace header and
// every envelope/history/reflect record to `trace`.
EpisodeResult run_episode(const Scenario& scenario, const Backends& backends,
                          const EpisodeConfig& config, TraceWriter& trace,
                          const ExperienceBank* bank = nullptr);

json percept_to_json(const PerceptTuple& p);
PerceptTuple percept_from_json(const json& j);

}  // namespace conav
