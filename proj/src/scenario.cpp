#include "conav/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace conav {

GridCoord Scenario::cell_of(double x, double y) const {
  return GridCoord{static_cast<int>(std::lround(y / cell_size)),
                   static_cast<int>(std::lround(x / cell_size))};
}

const Landmark* Scenario::find_landmark(const std::string& name) const {
  for (const auto& lm : landmarks)
    if (lm.name == name) return &lm;
  return nullptr;
}

double Scenario::diameter() const {
  double w = (cols() - 1) * cell_size;
  double h = (rows() - 1) * cell_size;
  return std::hypot(w, h);
}

bool Scenario::has_glass() const {
  for (const auto& row : grid)
    if (row.find('g') != std::string::npos) return true;
  return false;
}

void Scenario::validate() const {
  if (rows() < 1 || cols() < 1) throw ScenarioError("empty grid");
  for (const auto& row : grid) {
    if (static_cast<int>(row.size()) != cols())
      throw ScenarioError("ragged grid rows");
    for (char ch : row)
      if (ch != '.' && ch != '#' && ch != 'g')
        throw ScenarioError(std::string("bad grid char '") + ch + "'");
  }
  if (cell_size <= 0) throw ScenarioError("cell_size must be positive");
  GridCoord sc = cell_of(start.x, start.y);
  if (!in_bounds(sc) || at(sc) != Cell::Free)
    throw ScenarioError("start cell is not free");
  normalize_heading(start.heading);
  if (start.heading % 90 != 0) throw ScenarioError("start heading not cardinal");
  for (const auto& lm : landmarks) {
    if (lm.cells.empty())
      throw ScenarioError("landmark '" + lm.name + "' occupies no cell");
    for (auto gc : lm.cells)
      if (!in_bounds(gc))
        throw ScenarioError("landmark '" + lm.name + "' cell out of bounds");
  }
  for (const auto& name : subtasks)
    if (!find_landmark(name))
      throw ScenarioError("subtask references unknown landmark '" + name + "'");
  for (const auto& kp : key_points) {
    if (kp.subtask < 1 || kp.subtask > static_cast<int>(subtasks.size()))
      throw ScenarioError("key point references invalid subtask index");
    if (!in_bounds(kp.cell)) throw ScenarioError("key point cell out of bounds");
  }
  if (step_budget < 0) throw ScenarioError("negative step budget");
}

namespace {

json keypoint_to_json(const KeyPoint& kp) {
  json j;
  j["kind"] = kp.kind == KeyPoint::Kind::Visit ? "visit" : "decision";
  j["subtask"] = kp.subtask;
  j["cell"] = json::array({kp.cell.r, kp.cell.c});
  if (kp.heading) j["heading"] = *kp.heading;
  if (kp.action) j["action"] = to_string(*kp.action);
  return j;
}

KeyPoint keypoint_from_json(const json& j) {
  KeyPoint kp;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "visit") {
    kp.kind = KeyPoint::Kind::Visit;
  } else if (kind == "decision") {
    kp.kind = KeyPoint::Kind::DecisionAt;
  } else {
    throw ScenarioError("unknown key point kind '" + kind + "'");
  }
  kp.subtask = j.at("subtask").get<int>();
  kp.cell = GridCoord{j.at("cell").at(0).get<int>(), j.at("cell").at(1).get<int>()};
  if (j.contains("heading")) kp.heading = j.at("heading").get<int>();
  if (j.contains("action"))
    kp.action = action_from_string(j.at("action").get<std::string>());
  return kp;
}

}  // namespace

json to_json(const Scenario& s) {
  json j;
  j["grid"] = s.grid;
  j["cell_size"] = s.cell_size;
  json lms = json::array();
  for (const auto& lm : s.landmarks) {
    json cells = json::array();
    for (auto gc : lm.cells) cells.push_back(json::array({gc.r, gc.c}));
    lms.push_back(json{{"name", lm.name}, {"cells", cells}});
  }
  j["landmarks"] = lms;
  j["start"] = json{{"x", s.start.x}, {"y", s.start.y}, {"heading", s.start.heading}};
  j["instruction"] = s.instruction;
  j["subtasks"] = s.subtasks;
  json kps = json::array();
  for (const auto& kp : s.key_points) kps.push_back(keypoint_to_json(kp));
  j["key_points"] = kps;
  j["step_budget"] = s.step_budget;
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  try {
    s.grid = j.at("grid").get<std::vector<std::string>>();
    s.cell_size = j.at("cell_size").get<double>();
    for (const auto& lj : j.at("landmarks")) {
      Landmark lm;
      lm.name = lj.at("name").get<std::string>();
      for (const auto& cj : lj.at("cells"))
        lm.cells.push_back(GridCoord{cj.at(0).get<int>(), cj.at(1).get<int>()});
      s.landmarks.push_back(std::move(lm));
    }
    const auto& st = j.at("start");
    s.start = Pose{st.at("x").get<double>(), st.at("y").get<double>(),
                   st.at("heading").get<int>()};
    s.instruction = j.at("instruction").get<std::string>();
    s.subtasks = j.at("subtasks").get<std::vector<std::string>>();
    for (const auto& kj : j.at("key_points"))
      s.key_points.push_back(keypoint_from_json(kj));
    s.step_budget = j.at("step_budget").get<int>();
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file: " + path);
  out << to_json(s).dump(2) << "\n";
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string scenario_hash(const Scenario& s) {
  std::ostringstream os;
  os << std::hex << fnv1a64(to_json(s).dump());
  return os.str();
}

std::vector<GridCoord> satisfaction_set(const Scenario& s,
                                        const std::string& landmark_name,
                                        double radius) {
  std::vector<GridCoord> out;
  const Landmark* lm = s.find_landmark(landmark_name);
  if (!lm) return out;
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      GridCoord gc{r, c};
      for (auto tc : lm->cells) {
        double d = euclid(s.xc(gc), s.yc(gc), s.xc(tc), s.yc(tc));
        if (d <= radius + 1e-9) {
          out.push_back(gc);
          break;
        }
      }
    }
  }
  return out;
}

std::optional<double> shortest_in_order_path(const Scenario& s, double radius) {
  const int R = s.rows(), C = s.cols();
  auto idx = [C](GridCoord gc) { return gc.r * C + gc.c; };
  constexpr int kInf = std::numeric_limits<int>::max();

  // Multi-source BFS carried leg by leg: after leg k only cells satisfying
  // target k keep their distances.
  std::vector<int> dist(static_cast<size_t>(R) * C, kInf);
  GridCoord startc = s.cell_of(s.start.x, s.start.y);
  dist[idx(startc)] = 0;

  auto run_leg = [&](const std::vector<GridCoord>& goal) -> bool {
    std::deque<GridCoord> q;
    std::vector<int> next(static_cast<size_t>(R) * C, kInf);
    // seed with current distances, expanding in BFS order
    std::vector<std::pair<int, GridCoord>> seeds;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c)
        if (dist[idx({r, c})] != kInf) seeds.push_back({dist[idx({r, c})], {r, c}});
    std::sort(seeds.begin(), seeds.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [d, gc] : seeds) {
      next[idx(gc)] = d;
      q.push_back(gc);
    }
    static const int dr[4] = {1, -1, 0, 0};
    static const int dc[4] = {0, 0, 1, -1};
    while (!q.empty()) {
      GridCoord cur = q.front();
      q.pop_front();
      for (int k = 0; k < 4; ++k) {
        GridCoord nb{cur.r + dr[k], cur.c + dc[k]};
        if (!s.in_bounds(nb) || s.at(nb) != Cell::Free) continue;
        if (next[idx(nb)] != kInf) continue;
        next[idx(nb)] = next[idx(cur)] + 1;
        q.push_back(nb);
      }
    }
    std::fill(dist.begin(), dist.end(), kInf);
    bool reached = false;
    for (auto gc : goal) {
      if (s.at(gc) != Cell::Free) continue;  // must be standable
      if (next[idx(gc)] != kInf) {
        dist[idx(gc)] = next[idx(gc)];
        reached = true;
      }
    }
    return reached;
  };

  for (const auto& target : s.subtasks) {
    auto goal = satisfaction_set(s, target, radius);
    if (goal.empty()) return std::nullopt;
    if (!run_leg(goal)) return std::nullopt;
  }
  int best = kInf;
  for (int v : dist) best = std::min(best, v);
  if (best == kInf) return std::nullopt;
  return best * s.cell_size;
}

}  // namespace conav
