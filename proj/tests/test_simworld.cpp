#include <doctest.h>

#include <deque>
#include <random>
#include <set>

#include "conav/world.hpp"

using namespace conav;

namespace {

Scenario tiny_world(std::vector<std::string> grid, Pose start) {
  Scenario s;
  s.grid = std::move(grid);
  s.cell_size = 1.0;
  s.start = start;
  s.instruction = "Go to the printer.";
  s.step_budget = 50;
  return s;
}

// Independent in-order reachability oracle: BFS leg by leg over free cells,
// requiring the exact target cell.
bool bfs_visits_in_order(const Scenario& s) {
  GridCoord cur = s.cell_of(s.start.x, s.start.y);
  for (const auto& name : s.subtasks) {
    const Landmark* lm = s.find_landmark(name);
    REQUIRE(lm != nullptr);
    std::set<GridCoord> seen{cur};
    std::deque<GridCoord> q{cur};
    bool found = false;
    GridCoord hit{};
    while (!q.empty() && !found) {
      GridCoord c = q.front();
      q.pop_front();
      for (auto gc : lm->cells) {
        if (c == gc) {
          found = true;
          hit = c;
          break;
        }
      }
      if (found) break;
      static const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        GridCoord nb{c.r + dr[k], c.c + dc[k]};
        if (!s.in_bounds(nb) || s.at(nb) != Cell::Free) continue;
        if (seen.insert(nb).second) q.push_back(nb);
      }
    }
    if (!found) return false;
    cur = hit;
  }
  return true;
}

}  // namespace

TEST_CASE("forward step onto a free cell moves one cell along heading") {
  auto s = tiny_world({"....", "....", "....", "...."}, Pose{2, 1, 90});
  World w(s, {});
  auto r = w.step(Action::MoveForward);
  CHECK(r.outcome == StepOutcome::Moved);
  CHECK(r.pose.x == doctest::Approx(2.0));
  CHECK(r.pose.y == doctest::Approx(2.0));
  CHECK(r.pose.heading == 90);
}

TEST_CASE("turn left is a pure rotation") {
  auto s = tiny_world({"....", "....", "....", "...."}, Pose{0, 0, 0});
  World w(s, {});
  auto r = w.step(Action::TurnLeft90);
  CHECK(r.outcome == StepOutcome::Turned);
  CHECK(r.pose == Pose{0, 0, 90});
  auto r2 = w.step(Action::TurnRight90);
  CHECK(r2.pose.heading == 0);
}

TEST_CASE("forward into an obstacle blocks and leaves the pose unchanged") {
  auto s = tiny_world({"....", "..#.", "....", "...."}, Pose{1, 1, 0});
  World w(s, {});
  auto r = w.step(Action::MoveForward);
  CHECK(r.outcome == StepOutcome::Blocked);
  CHECK(r.pose == Pose{1, 1, 0});
}

TEST_CASE("glass blocks motion even though noisy percepts hide it") {
  auto s = tiny_world({"....", "..g.", "....", "...."}, Pose{1, 1, 0});
  NoiseConfig noise;
  noise.glass_blind = true;
  World w(s, noise);
  auto views = w.perceive();
  const auto& front = views[static_cast<int>(ViewDir::Front)];
  CHECK(front.traversability.walkable);
  for (const auto& ob : front.obstacles) CHECK(ob.name != "glass");
  auto r = w.step(Action::MoveForward);
  CHECK(r.outcome == StepOutcome::Blocked);
}

TEST_CASE("step after an accepted stop raises EpisodeFinished") {
  auto s = tiny_world({"....", "....", "....", "...."}, Pose{0, 0, 0});
  World w(s, {});
  auto r = w.step(Action::Stop);
  CHECK(r.outcome == StepOutcome::Stopped);
  CHECK(w.finished());
  CHECK_THROWS_AS(w.step(Action::MoveForward), EpisodeFinished);
}

TEST_CASE("adjacent landmark shows up in the front view at one cell") {
  auto s = tiny_world({"....", "....", "....", "...."}, Pose{1, 1, 0});
  s.landmarks = {Landmark{"printer", {{1, 2}}}};
  World w(s, {});
  auto views = w.perceive();
  const auto& front = views[static_cast<int>(ViewDir::Front)];
  REQUIRE(front.landmarks.size() == 1);
  CHECK(front.landmarks[0].name == "printer");
  CHECK(front.landmarks[0].bearing == doctest::Approx(0.0));
  CHECK(front.landmarks[0].distance == doctest::Approx(1.0));
  CHECK(front.context == "near the printer");
}

TEST_CASE("empty 5x5 world from the center has symmetric free ranges") {
  auto s = tiny_world({".....", ".....", ".....", ".....", "....."},
                      Pose{2, 2, 0});
  World w(s, {});
  w.view_range_cells = 2;
  auto views = w.perceive();
  for (const auto& v : views) {
    CHECK(v.traversability.free_range == doctest::Approx(2.0));
    CHECK(v.traversability.walkable);
  }
}

TEST_CASE("obstacle on the axis caps the free range at its distance") {
  auto s = tiny_world({".....", ".....", "..#..", ".....", "....."},
                      Pose{2, 0, 90});  // facing +y, wall two cells ahead
  World w(s, {});
  auto views = w.perceive();
  const auto& front = views[static_cast<int>(ViewDir::Front)];
  CHECK(front.traversability.free_range == doctest::Approx(1.0));
  REQUIRE(!front.obstacles.empty());
  CHECK(front.obstacles[0].distance == doctest::Approx(2.0));
}

TEST_CASE("percept soundness: every reported obstacle is a real occupied cell") {
  auto s = tiny_world({"..#..", ".....", "#...g", ".....", "..#.."},
                      Pose{2, 2, 0});
  World w(s, {});
  auto views = w.perceive(Pose{2, 2, 0});
  for (const auto& v : views) {
    for (const auto& ob : v.obstacles) {
      // reconstruct the cell from bearing and distance
      double ang = (ob.bearing + 0.0) * 3.14159265358979323846 / 180.0;
      double x = 2.0 + ob.distance * std::cos(ang);
      double y = 2.0 + ob.distance * std::sin(ang);
      GridCoord gc = s.cell_of(x, y);
      REQUIRE(s.in_bounds(gc));
      CHECK(s.at(gc) != Cell::Free);
    }
  }
}

TEST_CASE("step never mutates the grid or landmarks") {
  auto s = tiny_world({"....", ".#..", "....", "...."}, Pose{0, 0, 0});
  s.landmarks = {Landmark{"desk", {{3, 3}}}};
  World w(s, {});
  auto before_grid = w.scenario().grid;
  for (Action a : {Action::MoveForward, Action::TurnLeft90,
                   Action::MoveForward, Action::TurnRight90,
                   Action::MoveForward}) {
    w.step(a);
  }
  CHECK(w.scenario().grid == before_grid);
  CHECK(w.scenario().landmarks.size() == 1);
}

TEST_CASE("identical scenario, actions and noise seed give identical streams") {
  Scenario s = generate_scenario(11, 8, 8, 3, 2);
  NoiseConfig noise;
  noise.glass_blind = false;
  noise.distance_noise = 0.25;
  noise.seed = 99;

  auto run = [&](std::vector<Pose>* poses, std::vector<json>* percepts) {
    World w(s, noise);
    std::mt19937_64 actions(7);
    for (int i = 0; i < 30; ++i) {
      auto views = w.perceive();
      json vj = json::array();
      for (const auto& v : views) {
        vj.push_back(json{{"o", v.obstacles.size()},
                          {"l", v.landmarks.size()},
                          {"fr", v.traversability.free_range}});
      }
      percepts->push_back(vj);
      Action a = static_cast<Action>(actions() % 3);  // no Stop
      w.step(a);
      poses->push_back(w.pose());
    }
  };
  std::vector<Pose> p1, p2;
  std::vector<json> v1, v2;
  run(&p1, &v1);
  run(&p2, &v2);
  CHECK(p1 == p2);
  CHECK(v1 == v2);
}

TEST_CASE("moved steps displace exactly one cell, blocked steps none") {
  Scenario s = generate_scenario(5, 8, 8, 3, 2);
  World w(s, {});
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Pose before = w.pose();
    Action a = static_cast<Action>(rng() % 3);
    auto r = w.step(a);
    double d = euclid(before.x, before.y, r.pose.x, r.pose.y);
    if (r.outcome == StepOutcome::Moved)
      CHECK(d == doctest::Approx(s.cell_size));
    else
      CHECK(d == doctest::Approx(0.0));
  }
}

TEST_CASE("generated scenarios are deterministic and in-order solvable") {
  Scenario a = generate_scenario(1, 8, 8, 3, 2);
  Scenario b = generate_scenario(1, 8, 8, 3, 2);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(scenario_hash(a) == scenario_hash(b));

  for (uint64_t seed : {0, 1, 2, 3, 4, 17, 42}) {
    Scenario s = generate_scenario(seed, 8, 8, 3, 2);
    CAPTURE(seed);
    CHECK(bfs_visits_in_order(s));
    CHECK(s.step_budget >= 8);
    auto lstar = shortest_in_order_path(s, 1.0);
    REQUIRE(lstar.has_value());
    CHECK(*lstar > 0);
  }
}

TEST_CASE("generator rejects more subtasks than landmarks") {
  CHECK_THROWS_AS(generate_scenario(1, 8, 8, 3, 4), std::invalid_argument);
  CHECK_THROWS_AS(generate_scenario(1, 3, 8, 3, 2), std::invalid_argument);
}

TEST_CASE("glass corridor and revisit maze layouts validate and solve") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Scenario g = make_glass_corridor(seed);
    CHECK(g.has_glass());
    CHECK(bfs_visits_in_order(g));
    Scenario r = make_revisit_maze(seed);
    CHECK(!r.has_glass());
    CHECK(bfs_visits_in_order(r));
  }
}

TEST_CASE("scenario files round-trip through save and load") {
  Scenario s = generate_scenario(2, 8, 8, 3, 2);
  std::string path = "test_scenario_roundtrip.json";
  save_scenario(s, path);
  Scenario back = load_scenario(path);
  CHECK(to_json(back) == to_json(s));
  std::remove(path.c_str());
}
