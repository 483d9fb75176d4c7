#include "conav/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace conav {

std::string to_string(StepOutcome o) {
  switch (o) {
    case StepOutcome::Moved: return "Moved";
    case StepOutcome::Blocked: return "Blocked";
    case StepOutcome::Turned: return "Turned";
    case StepOutcome::Stopped: return "Stopped";
  }
  throw std::logic_error("unknown StepOutcome");
}

StepOutcome outcome_from_string(const std::string& s) {
  if (s == "Moved") return StepOutcome::Moved;
  if (s == "Blocked") return StepOutcome::Blocked;
  if (s == "Turned") return StepOutcome::Turned;
  if (s == "Stopped") return StepOutcome::Stopped;
  throw std::invalid_argument("not an outcome: " + s);
}

World::World(Scenario scenario, NoiseConfig noise)
    : scenario_(std::move(scenario)), noise_(noise), noise_rng_(noise.seed) {
  scenario_.validate();
  pose_ = scenario_.start;
}

StepOutcome World::probe(const Pose& pose, Action action) const {
  switch (action) {
    case Action::TurnLeft90:
    case Action::TurnRight90:
      return StepOutcome::Turned;
    case Action::Stop:
      return StepOutcome::Stopped;
    case Action::MoveForward: {
      auto [dx, dy] = heading_unit(pose.heading);
      GridCoord target = scenario_.cell_of(pose.x + dx * scenario_.cell_size,
                                           pose.y + dy * scenario_.cell_size);
      return scenario_.blocks_motion(target) ? StepOutcome::Blocked
                                             : StepOutcome::Moved;
    }
  }
  throw std::logic_error("unknown Action");
}

StepResult World::step(Action action) {
  if (finished_) throw EpisodeFinished();
  ++steps_;
  switch (action) {
    case Action::TurnLeft90:
      pose_.heading = normalize_heading(pose_.heading + 90);
      return {pose_, StepOutcome::Turned};
    case Action::TurnRight90:
      pose_.heading = normalize_heading(pose_.heading - 90);
      return {pose_, StepOutcome::Turned};
    case Action::Stop:
      finished_ = true;
      return {pose_, StepOutcome::Stopped};
    case Action::MoveForward: {
      if (probe(pose_, action) == StepOutcome::Blocked)
        return {pose_, StepOutcome::Blocked};
      auto [dx, dy] = heading_unit(pose_.heading);
      pose_.x += dx * scenario_.cell_size;
      pose_.y += dy * scenario_.cell_size;
      return {pose_, StepOutcome::Moved};
    }
  }
  throw std::logic_error("unknown Action");
}

bool World::visible(GridCoord from, GridCoord to) const {
  // Bresenham between cell centers; intermediate solid obstacles occlude.
  // Glass is transparent and never occludes.
  int r0 = from.r, c0 = from.c, r1 = to.r, c1 = to.c;
  int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
  int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
  int err = dc - dr;
  int r = r0, c = c0;
  while (!(r == r1 && c == c1)) {
    int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
    if (r == r1 && c == c1) break;
    if (scenario_.at(GridCoord{r, c}) == Cell::Obstacle) return false;
  }
  return true;
}

double World::perturb(double distance) const {
  if (noise_.distance_noise <= 0) return distance;
  double span = noise_.distance_noise;
  double u = static_cast<double>(noise_rng_()) /
             static_cast<double>(std::mt19937_64::max());
  double d = distance + (2.0 * u - 1.0) * span;
  return d < 0 ? 0 : d;
}

std::array<PerceptTuple, 4> World::perceive(const Pose& pose) const {
  const Scenario& s = scenario_;
  GridCoord me = s.cell_of(pose.x, pose.y);
  if (!s.in_bounds(me)) throw std::invalid_argument("pose outside bounds");
  double max_range = view_range_cells * s.cell_size;

  std::array<PerceptTuple, 4> out;
  for (auto v : kAllViews) out[static_cast<int>(v)].view = v;

  auto assign_view = [&](double bearing) -> int {
    for (auto v : kAllViews) {
      double d = norm180(bearing - view_center(v));
      if (d >= -45.0 && d < 45.0) return static_cast<int>(v);
    }
    return static_cast<int>(ViewDir::Back);  // bearing exactly -180 wraps here
  };

  // Obstacles: every occupied cell in range with line of sight.
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      GridCoord gc{r, c};
      if (gc == me) continue;
      Cell cell = s.at(gc);
      if (cell == Cell::Free) continue;
      if (cell == Cell::Glass && noise_.glass_blind) continue;
      double d = euclid(pose.x, pose.y, s.xc(gc), s.yc(gc));
      if (d > max_range + 1e-9) continue;
      if (!visible(me, gc)) continue;
      double bearing = bearing_from(pose, s.xc(gc), s.yc(gc));
      PerceptEntry e{cell == Cell::Glass ? "glass" : "wall", bearing,
                     perturb(d)};
      out[assign_view(bearing)].obstacles.push_back(e);
    }
  }

  // Landmarks: one entry per landmark per view, at its nearest visible cell.
  for (const auto& lm : s.landmarks) {
    std::array<const GridCoord*, 4> best{nullptr, nullptr, nullptr, nullptr};
    std::array<double, 4> best_d{0, 0, 0, 0};
    for (const auto& gc : lm.cells) {
      if (gc == me) continue;
      double d = euclid(pose.x, pose.y, s.xc(gc), s.yc(gc));
      if (d > max_range + 1e-9) continue;
      if (!visible(me, gc)) continue;
      int vi = assign_view(bearing_from(pose, s.xc(gc), s.yc(gc)));
      if (!best[vi] || d < best_d[vi]) {
        best[vi] = &gc;
        best_d[vi] = d;
      }
    }
    for (int vi = 0; vi < 4; ++vi) {
      if (!best[vi]) continue;
      double bearing = bearing_from(pose, s.xc(*best[vi]), s.yc(*best[vi]));
      out[vi].landmarks.push_back(
          PerceptEntry{lm.name, bearing, perturb(best_d[vi])});
    }
  }

  // Traversability: walk the view axis cell by cell until something blocks.
  for (auto v : kAllViews) {
    int heading = normalize_heading(pose.heading +
                                    static_cast<int>(view_center(v)));
    auto [dx, dy] = heading_unit(heading);
    int free_cells = 0;
    for (int k = 1; k <= view_range_cells; ++k) {
      GridCoord gc{me.r + dy * k, me.c + dx * k};
      if (!s.in_bounds(gc)) break;
      Cell cell = s.at(gc);
      if (cell == Cell::Obstacle) break;
      if (cell == Cell::Glass && !noise_.glass_blind) break;
      ++free_cells;
    }
    auto& t = out[static_cast<int>(v)].traversability;
    t.free_range = free_cells * s.cell_size;
    t.walkable = t.free_range >= s.cell_size - 1e-9;
  }

  // Context phrase and deterministic entry ordering.
  for (auto& view : out) {
    auto by_dist = [](const PerceptEntry& a, const PerceptEntry& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      if (a.name != b.name) return a.name < b.name;
      return a.bearing < b.bearing;
    };
    std::sort(view.obstacles.begin(), view.obstacles.end(), by_dist);
    std::sort(view.landmarks.begin(), view.landmarks.end(), by_dist);
    view.context = view.landmarks.empty()
                       ? "open space"
                       : "near the " + view.landmarks.front().name;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario generation

namespace {

const std::vector<std::string>& name_pool() {
  static const std::vector<std::string> pool = {
      "printer", "desk",  "sofa",  "plant",  "cabinet", "window",
      "lamp",    "bin",   "shelf", "chair",  "table",   "piano",
      "fridge",  "mirror", "vase",  "rug"};
  return pool;
}

uint64_t pick(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[pick(rng, i)]);
}

std::string build_instruction(const std::vector<std::string>& targets) {
  std::ostringstream os;
  if (targets.size() == 1) {
    os << "Go to the " << targets[0] << ".";
    return os.str();
  }
  for (size_t i = 0; i < targets.size(); ++i) {
    if (i == 0)
      os << "First, go to the " << targets[i] << ".";
    else if (i + 1 == targets.size())
      os << " Finally, go to the " << targets[i] << ".";
    else
      os << " Then, go to the " << targets[i] << ".";
  }
  return os.str();
}

bool all_free_connected(const Scenario& s, GridCoord from) {
  std::set<GridCoord> seen{from};
  std::deque<GridCoord> q{from};
  static const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    GridCoord cur = q.front();
    q.pop_front();
    for (int k = 0; k < 4; ++k) {
      GridCoord nb{cur.r + dr[k], cur.c + dc[k]};
      if (!s.in_bounds(nb) || s.at(nb) != Cell::Free) continue;
      if (seen.insert(nb).second) q.push_back(nb);
    }
  }
  for (int r = 0; r < s.rows(); ++r)
    for (int c = 0; c < s.cols(); ++c)
      if (s.at(GridCoord{r, c}) == Cell::Free && !seen.count(GridCoord{r, c}))
        return false;
  return true;
}

int bfs_cells(const Scenario& s, GridCoord from, GridCoord to) {
  if (from == to) return 0;
  std::map<GridCoord, int> dist{{from, 0}};
  std::deque<GridCoord> q{from};
  static const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    GridCoord cur = q.front();
    q.pop_front();
    for (int k = 0; k < 4; ++k) {
      GridCoord nb{cur.r + dr[k], cur.c + dc[k]};
      if (!s.in_bounds(nb) || s.at(nb) != Cell::Free) continue;
      if (dist.count(nb)) continue;
      dist[nb] = dist[cur] + 1;
      if (nb == to) return dist[nb];
      q.push_back(nb);
    }
  }
  return -1;
}

void add_visit_key_points(Scenario& s) {
  s.key_points.clear();
  for (size_t k = 0; k < s.subtasks.size(); ++k) {
    const Landmark* lm = s.find_landmark(s.subtasks[k]);
    KeyPoint kp;
    kp.kind = KeyPoint::Kind::Visit;
    kp.subtask = static_cast<int>(k) + 1;
    kp.cell = lm->cells.front();
    s.key_points.push_back(kp);
  }
}

}  // namespace

Scenario generate_scenario(uint64_t seed, int rows, int cols,
                           int landmark_count, int subtask_count) {
  if (rows < 4 || cols < 4)
    throw std::invalid_argument("grid must be at least 4x4");
  if (subtask_count < 1 || subtask_count > landmark_count)
    throw std::invalid_argument("need 1 <= subtask_count <= landmark_count");
  if (landmark_count > static_cast<int>(name_pool().size()))
    throw std::invalid_argument("landmark_count exceeds the name pool");

  std::mt19937_64 rng(seed);
  const double radius = 1.0;
  const int max_attempts = 500;

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Scenario s;
    s.cell_size = 1.0;
    s.grid.assign(rows, std::string(cols, '.'));

    int n_obstacles = static_cast<int>(0.12 * rows * cols);
    for (int i = 0; i < n_obstacles; ++i) {
      int r = static_cast<int>(pick(rng, rows));
      int c = static_cast<int>(pick(rng, cols));
      s.grid[r][c] = '#';
    }

    std::vector<GridCoord> free_cells;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        if (s.grid[r][c] == '.') free_cells.push_back({r, c});
    if (static_cast<int>(free_cells.size()) < landmark_count + 1) continue;

    shuffle_vec(free_cells, rng);
    std::vector<std::string> names = name_pool();
    shuffle_vec(names, rng);

    bool ok = true;
    for (int i = 0; i < landmark_count; ++i) {
      Landmark lm;
      lm.name = names[i];
      lm.cells = {free_cells[i]};
      s.landmarks.push_back(std::move(lm));
    }
    GridCoord startc = free_cells[landmark_count];
    int heading = static_cast<int>(pick(rng, 4)) * 90;
    s.start = Pose{s.xc(startc), s.yc(startc), heading};

    std::vector<int> order(landmark_count);
    for (int i = 0; i < landmark_count; ++i) order[i] = i;
    shuffle_vec(order, rng);
    for (int k = 0; k < subtask_count; ++k)
      s.subtasks.push_back(s.landmarks[order[k]].name);

    if (!all_free_connected(s, startc)) continue;

    // Keep the first target out of immediate reach so L* is positive.
    int d_first = bfs_cells(s, startc, s.landmarks[order[0]].cells.front());
    if (d_first < 3) continue;

    auto lstar = shortest_in_order_path(s, radius);
    if (!lstar || *lstar <= 0) continue;

    s.instruction = build_instruction(s.subtasks);
    s.step_budget = static_cast<int>(4.0 * (*lstar / s.cell_size));
    if (s.step_budget < 8) continue;
    add_visit_key_points(s);

    try {
      s.validate();
    } catch (const ScenarioError&) {
      ok = false;
    }
    if (ok) return s;
  }
  throw Unsatisfiable("could not satisfy scenario constraints for seed " +
                      std::to_string(seed));
}

Scenario make_glass_corridor(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int rows = 7, cols = 11;
  Scenario s;
  s.cell_size = 1.0;
  s.grid.assign(rows, std::string(cols, '.'));
  for (int c = 0; c < cols; ++c) {
    s.grid[0][c] = '#';
    s.grid[rows - 1][c] = '#';
  }
  for (int r = 0; r < rows; ++r) {
    s.grid[r][0] = '#';
    s.grid[r][cols - 1] = '#';
  }

  // Glass barrier across the room with one opening left free.
  int glass_col = 4 + static_cast<int>(pick(rng, 3));  // 4..6
  int gap_row = (pick(rng, 2) == 0) ? 1 : rows - 2;
  Landmark door{"glass door", {}};
  for (int r = 1; r < rows - 1; ++r) {
    if (r == gap_row) continue;
    s.grid[r][glass_col] = 'g';
    door.cells.push_back({r, glass_col});
  }

  const std::vector<std::string> target_names = {"printer", "fridge", "piano",
                                                 "cabinet", "shelf"};
  std::string target = target_names[pick(rng, target_names.size())];
  int target_row = 2 + static_cast<int>(pick(rng, 3));  // 2..4
  GridCoord target_cell{target_row, cols - 2};
  Landmark goal{target, {target_cell}};

  // Decorative landmark on the start side; varies the scene vocabulary.
  const std::vector<std::string> deco_names = {"plant", "vase",  "mirror",
                                               "chair", "table", "rug"};
  std::string deco = deco_names[pick(rng, deco_names.size())];
  int deco_row = (gap_row == 1) ? rows - 2 : 1;
  Landmark deco_lm{deco, {{deco_row, 1}}};

  s.landmarks = {door, goal, deco_lm};
  int start_row = 2 + static_cast<int>(pick(rng, 3));
  s.start = Pose{1.0, static_cast<double>(start_row), 0};
  s.subtasks = {target};
  s.instruction = build_instruction(s.subtasks);

  auto lstar = shortest_in_order_path(s, 1.0);
  if (!lstar) throw Unsatisfiable("glass corridor layout has no detour");
  s.step_budget = static_cast<int>(4.0 * (*lstar / s.cell_size));
  add_visit_key_points(s);
  s.validate();
  return s;
}

Scenario make_revisit_maze(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int rows = 9, cols = 13;
  Scenario s;
  s.cell_size = 1.0;
  s.grid.assign(rows, std::string(cols, '#'));

  const int corridor = 4;
  for (int c = 1; c < cols - 1; ++c) s.grid[corridor][c] = '.';

  // Teeth: dead-end branches off the corridor at even columns.
  std::vector<std::pair<int, bool>> teeth;  // column, goes_up
  for (int c = 2; c <= cols - 3; c += 2) {
    bool up = ((seed >> (c / 2)) & 1ULL) != 0;
    for (int d = 1; d <= 3; ++d) {
      int r = up ? corridor - d : corridor + d;
      s.grid[r][c] = '.';
    }
    teeth.push_back({c, up});
  }

  // First target deep in the far tooth, second in a near one: the agent has
  // to come back through explored corridor.
  auto tip = [&](std::pair<int, bool> t) {
    return GridCoord{t.second ? corridor - 3 : corridor + 3, t.first};
  };
  std::pair<int, bool> far_tooth = teeth.back();
  std::pair<int, bool> near_tooth = teeth[pick(rng, 2)];  // one of first two

  Landmark printer{"printer", {tip(far_tooth)}};
  Landmark lamp{"lamp", {tip(near_tooth)}};
  s.landmarks = {printer, lamp};
  s.start = Pose{1.0, static_cast<double>(corridor), 0};
  s.subtasks = {"printer", "lamp"};
  s.instruction = build_instruction(s.subtasks);

  auto lstar = shortest_in_order_path(s, 1.0);
  if (!lstar) throw Unsatisfiable("revisit maze is disconnected");
  s.step_budget = static_cast<int>(6.0 * (*lstar / s.cell_size));
  add_visit_key_points(s);
  s.validate();
  return s;
}

}  // namespace conav
