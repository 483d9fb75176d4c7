#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "conav/scenario.hpp"
#include "conav/types.hpp"

namespace conav {

enum class StepOutcome { Moved, Blocked, Turned, Stopped };

std::string to_string(StepOutcome o);
StepOutcome outcome_from_string(const std::string& s);

struct PerceptEntry {
  std::string name;  // obstacle category or landmark name
  double bearing = 0.0;  // degrees relative to agent heading, [-180, 180)
  double distance = 0.0;  // meters
};

struct Traversability {
  bool walkable = false;
  double free_range = 0.0;  // meters of free travel along the view axis
};

// Per-view percept: obstacles O, landmarks L, traversability T, context M.
struct PerceptTuple {
  ViewDir view = ViewDir::Front;
  std::vector<PerceptEntry> obstacles;
  std::vector<PerceptEntry> landmarks;
  Traversability traversability;
  std::string context;
};

struct NoiseConfig {
  bool glass_blind = false;   // report glass cells as free
  double distance_noise = 0.0;  // uniform +/- meters added to distances
  uint64_t seed = 0;
};

struct EpisodeFinished : std::runtime_error {
  EpisodeFinished() : std::runtime_error("step after Stop was accepted") {}
};

struct StepResult {
  Pose pose;
  StepOutcome outcome = StepOutcome::Stopped;
};

// Deterministic grid world. Holds the ground truth and executes actions with
// collision semantics; glass blocks motion but may be hidden from percepts.
class World {
 public:
  World(Scenario scenario, NoiseConfig noise);

  const Scenario& scenario() const { return scenario_; }
  const Pose& pose() const { return pose_; }
  bool finished() const { return finished_; }
  int steps_executed() const { return steps_; }

  StepResult step(Action action);

  // Four percept tuples (front, right, back, left) for the given pose.
  std::array<PerceptTuple, 4> perceive(const Pose& pose) const;
  std::array<PerceptTuple, 4> perceive() const { return perceive(pose_); }

  // Outcome the action would have at `pose` without mutating anything.
  StepOutcome probe(const Pose& pose, Action action) const;

  int view_range_cells = 5;  // max percept range, in cells

 private:
  Scenario scenario_;
  NoiseConfig noise_;
  Pose pose_;
  bool finished_ = false;
  int steps_ = 0;
  mutable std::mt19937_64 noise_rng_;

  bool visible(GridCoord from, GridCoord to) const;
  double perturb(double distance) const;
};

struct Unsatisfiable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic random scenario with an in-order free path over the targets
// (checked by BFS). Throws Unsatisfiable when constraints cannot be met.
Scenario generate_scenario(uint64_t seed, int rows, int cols,
                           int landmark_count, int subtask_count);

// Corridor split by a glass barrier carrying a "glass door" landmark, with a
// side opening as detour. The canonical misperception failure scenario.
Scenario make_glass_corridor(uint64_t seed);

// Branching map with dead ends and targets placed to force exploration;
// exercises revisit behaviour of the mapping stack.
Scenario make_revisit_maze(uint64_t seed);

}  // namespace conav
