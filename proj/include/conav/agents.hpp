#pragma once

#include <array>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "conav/mapper.hpp"
#include "conav/memory.hpp"
#include "conav/scenario.hpp"
#include "conav/types.hpp"
#include "conav/world.hpp"

namespace conav {

enum class SubTaskStatus { Pending, Active, Done };

std::string to_string(SubTaskStatus s);
SubTaskStatus subtask_status_from_string(const std::string& s);

struct SubTask {
  int index = 1;  // contiguous from 1
  std::string description;
  std::string target;  // landmark name; may be empty for degraded plans
  SubTaskStatus status = SubTaskStatus::Pending;
};

struct SubTaskPlan {
  std::string instruction;
  std::vector<SubTask> subtasks;

  bool all_done() const;
  int active_index() const;         // 1-based; 0 when none active
  const SubTask* active() const;    // nullptr when all done
  void advance();                   // marks active Done, activates the next

  json to_json() const;
  static SubTaskPlan from_json(const json& j);
};

struct SalientEntry {
  std::string name;
  double bearing = 0.0;   // degrees relative to agent heading
  double distance = 0.0;  // meters
  bool task_relevant = false;
};

// Distilled task-oriented description of the four views.
struct EnvDescription {
  std::array<std::string, 4> summaries;  // front/right/back/left
  std::vector<SalientEntry> salient;
  std::set<ViewDir> traversable_dirs;
  std::array<PerceptTuple, 4> raw_views;

  bool traversable(ViewDir v) const { return traversable_dirs.count(v) > 0; }
  double front_free_range() const;
  // One-line digest used for history records and feature encoding.
  std::string digest() const;
  std::vector<std::string> salient_names() const;

  json to_json() const;
};

struct Decision {
  Action action = Action::Stop;
  std::string justification;
  std::vector<NodeId> candidate_refs;

  json to_json() const;
};

struct VerifyResult {
  bool done = false;
  double progress = 0.0;
};

struct PlanEmptyError : std::runtime_error {
  PlanEmptyError() : std::runtime_error("no sub-task could be extracted") {}
};
struct DeadlockSignal : std::runtime_error {
  DeadlockSignal() : std::runtime_error("no traversable direction") {}
};
struct BackendUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Context handed to the planner: the landmark vocabulary of the scene
// (names only, never occupancy).
struct PlanContext {
  std::vector<std::string> lexicon;
};

// Context for verification. The scripted verifier measures progress against
// the landmark coordinate table; remote verifiers judge from text only.
struct VerifyContext {
  std::map<std::string, std::vector<Coordinate>> landmark_coords;
  double d_norm = 1.0;  // scenario bounding-box diagonal
};

struct DecideContext {
  double delta = 1.0;
  bool use_topo = true;
  bool use_geo = true;
};

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  virtual SubTaskPlan plan(const std::string& instruction,
                           const PlanContext& ctx) = 0;
  virtual VerifyResult verify(const SubTask& subtask, const EnvDescription& env,
                              const std::vector<HistoryRecord>& window,
                              const Pose& pose, double tau,
                              const VerifyContext& ctx,
                              const std::vector<const ExperienceEntry*>&
                                  retrieved_advisory) = 0;
};

class ObserverBackend {
 public:
  virtual ~ObserverBackend() = default;
  virtual EnvDescription observe(const std::array<PerceptTuple, 4>& views,
                                 const SubTask& subtask) = 0;
};

class ControllerBackend {
 public:
  virtual ~ControllerBackend() = default;
  // Throws DeadlockSignal when no direction is traversable.
  virtual Decision decide(const SubTask& subtask, const EnvDescription& env,
                          const AgentMap& map,
                          const std::vector<HistoryRecord>& window,
                          const SubTaskPlan& plan,
                          const DecideContext& ctx) = 0;
};

// Deterministic rule-based backends. Byte-stable outputs for identical
// inputs.
class ScriptedPlanner : public PlannerBackend {
 public:
  SubTaskPlan plan(const std::string& instruction,
                   const PlanContext& ctx) override;
  VerifyResult verify(const SubTask& subtask, const EnvDescription& env,
                      const std::vector<HistoryRecord>& window,
                      const Pose& pose, double tau, const VerifyContext& ctx,
                      const std::vector<const ExperienceEntry*>&
                          retrieved_advisory) override;
};

class ScriptedObserver : public ObserverBackend {
 public:
  EnvDescription observe(const std::array<PerceptTuple, 4>& views,
                         const SubTask& subtask) override;
};

// Carries per-episode sighting memory (landmark name -> last estimated
// coordinate), so targets seen earlier can be approached once their
// sub-task activates. Use one instance per episode.
class ScriptedController : public ControllerBackend {
 public:
  Decision decide(const SubTask& subtask, const EnvDescription& env,
                  const AgentMap& map, const std::vector<HistoryRecord>& window,
                  const SubTaskPlan& plan, const DecideContext& ctx) override;

 private:
  std::map<std::string, Coordinate> seen_;
};

// Case-insensitive token overlap between an entity name and the sub-task
// target; the scripted salience filter.
bool tokens_overlap(const std::string& name, const std::string& target);

// Quadrant assignment for a relative bearing: Front (-45, 45], Left
// (45, 135], Right (-135, -45], Back otherwise.
ViewDir bearing_quadrant(double bearing);

}  // namespace conav
