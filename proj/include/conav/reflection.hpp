#pragma once

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "conav/agents.hpp"
#include "conav/memory.hpp"
#include "conav/types.hpp"

namespace conav {

enum class VerdictFlag { Pass, Conflict, Risk };

std::string to_string(VerdictFlag f);

struct LocalVerdict {
  VerdictFlag flag = VerdictFlag::Pass;
  std::string reason;
  std::optional<std::string> matched_id;   // Risk only
  std::optional<double> similarity;        // Risk only
  std::optional<std::string> retrieved_id; // top hit of any retrieval
  std::optional<double> retrieved_score;
};

struct NoAlternativeError : std::runtime_error {
  NoAlternativeError() : std::runtime_error("no alternative action available") {}
};

// Per-episode local reflection state: verdicts, the micro-planner, and the
// ledger of observed expectation mismatches. The ledger feeds both the
// conflict predicate and env sanitation after a backtrack.
class LocalReflector {
 public:
  LocalReflector(double tau_risk, double delta)
      : tau_risk_(tau_risk), delta_(delta) {}

  // Pre-execution verification of a proposed action. The current pose is
  // taken from the map snapshot's trajectory.
  LocalVerdict local_check(Action action, const EnvDescription& env,
                           const AgentMap& map, const SubTask& subtask,
                           const ExperienceBank& bank);

  // Deterministic substitution for a vetoed action. Never returns the
  // original. Throws NoAlternativeError when nothing is traversable.
  Action micro_plan(const LocalVerdict& verdict, const EnvDescription& env,
                    Action original, const ExperienceBank& bank);

  // Post-execution expectation check; mismatch means the percepts promised
  // movement but the world blocked it.
  static bool mismatch(StepOutcome expected, StepOutcome actual);

  // Records a mismatch so the same action is vetoed at this pose from now
  // on and env sanitation can hide the lying direction.
  void record_mismatch(const Pose& pose, Action action);

  // Removes directions the ledger knows to be blocked at `pose` from the
  // description (the realized form of "re-decide after backtrack").
  EnvDescription sanitize(const EnvDescription& env, const Pose& pose) const;

  int checks_performed() const { return checks_; }
  int retrievals_performed() const { return retrievals_; }

 private:
  double tau_risk_;
  double delta_;
  int checks_ = 0;
  int retrievals_ = 0;
  std::set<std::tuple<long long, long long, int, std::string>> mismatches_;
  std::set<std::tuple<long long, long long, int, std::string>> risk_vetoed_;

  static std::tuple<long long, long long, int, std::string> key(
      const Pose& pose, const std::string& tag);
  bool known_mismatch(const Pose& pose, Action action) const;
};

StepOutcome expected_outcome(Action action, const EnvDescription& env);

// ---------------------------------------------------------------------------
// Global reflection: post-episode segmentation, attribution, distillation.

enum class SegmentLabel { Progress, Stagnation, Oscillation, Failure };

std::string to_string(SegmentLabel l);

struct Segment {
  int start_t = 0;
  int end_t = 0;  // inclusive
  SegmentLabel label = SegmentLabel::Progress;
};

struct EpisodeAnalysis {
  std::vector<Segment> segments;
  std::vector<ExperienceEntry> distilled;
};

struct GlobalReflectConfig {
  int stagnation_window = 6;   // records with unchanged (x, y)
  int oscillation_window = 4;  // alternating turn records
  std::string episode_id;      // prefix for distilled entry ids
  bool episode_failed = false;
};

// Segments the history at sub-task completions, stagnations and
// oscillations; distills one experience entry per non-progress segment.
EpisodeAnalysis global_reflect(const History& history, const SubTaskPlan& plan,
                               const std::string& instruction,
                               const GlobalReflectConfig& cfg);

}  // namespace conav
