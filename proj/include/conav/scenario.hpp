#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conav/types.hpp"

namespace conav {

using json = nlohmann::ordered_json;

enum class Cell : char { Free = '.', Obstacle = '#', Glass = 'g' };

struct GridCoord {
  int r = 0;
  int c = 0;
  bool operator==(const GridCoord& o) const { return r == o.r && c == o.c; }
  bool operator<(const GridCoord& o) const {
    return r != o.r ? r < o.r : c < o.c;
  }
};

struct Landmark {
  std::string name;
  std::vector<GridCoord> cells;
};

// Annotated key decision used for KPA grading. `Visit` checks that the
// trajectory enters `radius` of the cell while the sub-task is active;
// `DecisionAt` checks the action executed the first time the agent stands at
// the annotated pose.
struct KeyPoint {
  enum class Kind { Visit, DecisionAt };
  Kind kind = Kind::Visit;
  int subtask = 1;  // 1-based index into ground-truth sub-tasks
  GridCoord cell;
  std::optional<int> heading;       // DecisionAt only
  std::optional<Action> action;     // DecisionAt only
};

struct Scenario {
  std::vector<std::string> grid;  // rows of '.', '#', 'g'; row index = y
  double cell_size = 1.0;
  std::vector<Landmark> landmarks;
  Pose start;
  std::string instruction;
  std::vector<std::string> subtasks;  // ordered ground-truth landmark names
  std::vector<KeyPoint> key_points;
  int step_budget = 0;

  int rows() const { return static_cast<int>(grid.size()); }
  int cols() const { return grid.empty() ? 0 : static_cast<int>(grid[0].size()); }

  bool in_bounds(GridCoord gc) const {
    return gc.r >= 0 && gc.r < rows() && gc.c >= 0 && gc.c < cols();
  }
  Cell at(GridCoord gc) const { return static_cast<Cell>(grid[gc.r][gc.c]); }
  bool blocks_motion(GridCoord gc) const {
    return !in_bounds(gc) || at(gc) != Cell::Free;
  }

  GridCoord cell_of(double x, double y) const;
  double xc(GridCoord gc) const { return gc.c * cell_size; }
  double yc(GridCoord gc) const { return gc.r * cell_size; }

  const Landmark* find_landmark(const std::string& name) const;
  // Bounding-box diagonal of the coordinate grid, used as D_norm.
  double diameter() const;
  bool has_glass() const;

  void validate() const;  // throws ScenarioError on invariant violation
};

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

// FNV-1a over the canonical serialized scenario, as a hex string.
std::string scenario_hash(const Scenario& s);
uint64_t fnv1a64(const std::string& bytes);

// Length in meters of the shortest 4-connected walk that starts at
// `s.start`, and enters `radius` of each ground-truth target in order.
// Returns nullopt when no such walk exists.
std::optional<double> shortest_in_order_path(const Scenario& s, double radius);

// Cells whose center lies within `radius` of any cell of the landmark.
std::vector<GridCoord> satisfaction_set(const Scenario& s,
                                        const std::string& landmark_name,
                                        double radius);

}  // namespace conav
