#include "conav/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <tuple>
#include <iomanip>
#include <optional>
#include <limits>
#include <sstream>

namespace conav {

std::string to_string(SubTaskStatus s) {
  switch (s) {
    case SubTaskStatus::Pending: return "Pending";
    case SubTaskStatus::Active: return "Active";
    case SubTaskStatus::Done: return "Done";
  }
  throw std::logic_error("unknown SubTaskStatus");
}

SubTaskStatus subtask_status_from_string(const std::string& s) {
  if (s == "Pending") return SubTaskStatus::Pending;
  if (s == "Active") return SubTaskStatus::Active;
  if (s == "Done") return SubTaskStatus::Done;
  throw std::invalid_argument("not a subtask status: " + s);
}

bool SubTaskPlan::all_done() const {
  for (const auto& st : subtasks)
    if (st.status != SubTaskStatus::Done) return false;
  return true;
}

int SubTaskPlan::active_index() const {
  for (const auto& st : subtasks)
    if (st.status == SubTaskStatus::Active) return st.index;
  return 0;
}

const SubTask* SubTaskPlan::active() const {
  for (const auto& st : subtasks)
    if (st.status == SubTaskStatus::Active) return &st;
  return nullptr;
}

void SubTaskPlan::advance() {
  for (size_t i = 0; i < subtasks.size(); ++i) {
    if (subtasks[i].status == SubTaskStatus::Active) {
      subtasks[i].status = SubTaskStatus::Done;
      if (i + 1 < subtasks.size())
        subtasks[i + 1].status = SubTaskStatus::Active;
      return;
    }
  }
  throw std::logic_error("advance() with no active sub-task");
}

json SubTaskPlan::to_json() const {
  json arr = json::array();
  for (const auto& st : subtasks)
    arr.push_back(json{{"index", st.index},
                       {"description", st.description},
                       {"target", st.target},
                       {"status", to_string(st.status)}});
  return json{{"instruction", instruction}, {"subtasks", arr}};
}

SubTaskPlan SubTaskPlan::from_json(const json& j) {
  SubTaskPlan p;
  p.instruction = j.at("instruction").get<std::string>();
  for (const auto& sj : j.at("subtasks")) {
    SubTask st;
    st.index = sj.at("index").get<int>();
    st.description = sj.at("description").get<std::string>();
    st.target = sj.at("target").get<std::string>();
    st.status = sj.contains("status")
                    ? subtask_status_from_string(sj.at("status").get<std::string>())
                    : SubTaskStatus::Pending;
    p.subtasks.push_back(std::move(st));
  }
  return p;
}

double EnvDescription::front_free_range() const {
  return raw_views[static_cast<int>(ViewDir::Front)].traversability.free_range;
}

std::vector<std::string> EnvDescription::salient_names() const {
  std::vector<std::string> names;
  for (const auto& e : salient) names.push_back(e.name);
  return names;
}

std::string EnvDescription::digest() const {
  std::ostringstream os;
  if (salient.empty()) {
    os << "open space";
  } else {
    for (size_t i = 0; i < salient.size(); ++i) {
      if (i) os << "; ";
      os << salient[i].name;
      if (salient[i].task_relevant) os << "*";
    }
  }
  os << " | trav:";
  bool first = true;
  for (auto v : kAllViews) {
    if (!traversable_dirs.count(v)) continue;
    os << (first ? " " : ",") << to_string(v);
    first = false;
  }
  if (first) os << " none";
  return os.str();
}

json EnvDescription::to_json() const {
  json j;
  j["summaries"] = json{{"front", summaries[0]},
                        {"right", summaries[1]},
                        {"back", summaries[2]},
                        {"left", summaries[3]}};
  json sal = json::array();
  for (const auto& e : salient)
    sal.push_back(json{{"name", e.name},
                       {"bearing", e.bearing},
                       {"distance", e.distance},
                       {"task_relevant", e.task_relevant}});
  j["salient"] = sal;
  json trav = json::array();
  for (auto v : kAllViews)
    if (traversable_dirs.count(v)) trav.push_back(to_string(v));
  j["traversable"] = trav;
  return j;
}

json Decision::to_json() const {
  json j;
  j["action"] = to_string(action);
  j["justification"] = justification;
  j["candidate_refs"] = candidate_refs;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool word_boundary_find(const std::string& haystack, const std::string& needle,
                        size_t* pos_out) {
  if (needle.empty()) return false;
  size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    bool left_ok =
        pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
    size_t end = pos + needle.size();
    bool right_ok = end >= haystack.size() ||
                    !std::isalnum(static_cast<unsigned char>(haystack[end]));
    if (left_ok && right_ok) {
      if (pos_out) *pos_out = pos;
      return true;
    }
    ++pos;
  }
  return false;
}

}  // namespace

bool tokens_overlap(const std::string& name, const std::string& target) {
  if (name.empty() || target.empty()) return false;
  FeatureVector a = encode(name), b = encode(target);
  for (const auto& [tok, _] : a)
    if (b.count(tok)) return true;
  return false;
}

ViewDir bearing_quadrant(double bearing) {
  double b = norm180(bearing);
  if (b > -45.0 && b <= 45.0) return ViewDir::Front;
  if (b > 45.0 && b <= 135.0) return ViewDir::Left;
  if (b > -135.0 && b <= -45.0) return ViewDir::Right;
  return ViewDir::Back;
}

SubTaskPlan ScriptedPlanner::plan(const std::string& instruction,
                                  const PlanContext& ctx) {
  if (instruction.empty()) throw PlanEmptyError();
  std::string hay = lower(instruction);
  std::vector<std::pair<size_t, std::string>> found;
  for (const auto& name : ctx.lexicon) {
    size_t pos = 0;
    if (word_boundary_find(hay, lower(name), &pos)) found.push_back({pos, name});
  }
  std::sort(found.begin(), found.end());
  if (found.empty()) throw PlanEmptyError();

  SubTaskPlan plan;
  plan.instruction = instruction;
  int idx = 1;
  for (const auto& [pos, name] : found) {
    SubTask st;
    st.index = idx++;
    st.description = "Reach the " + name;
    st.target = name;
    st.status = st.index == 1 ? SubTaskStatus::Active : SubTaskStatus::Pending;
    plan.subtasks.push_back(std::move(st));
  }
  return plan;
}

VerifyResult ScriptedPlanner::verify(
    const SubTask& subtask, const EnvDescription& /*env*/,
    const std::vector<HistoryRecord>& /*window*/, const Pose& pose, double tau,
    const VerifyContext& ctx,
    const std::vector<const ExperienceEntry*>& /*retrieved_advisory*/) {
  auto it = ctx.landmark_coords.find(subtask.target);
  if (it == ctx.landmark_coords.end() || it->second.empty())
    return {false, 0.0};
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& c : it->second)
    dist = std::min(dist, euclid(pose.x, pose.y, c.x, c.y));
  double phi = 1.0 - dist / ctx.d_norm;
  phi = std::clamp(phi, 0.0, 1.0);
  return {phi >= tau, phi};
}

EnvDescription ScriptedObserver::observe(
    const std::array<PerceptTuple, 4>& views, const SubTask& subtask) {
  EnvDescription env;
  env.raw_views = views;

  for (auto v : kAllViews) {
    const auto& view = views[static_cast<int>(v)];
    if (view.traversability.walkable) env.traversable_dirs.insert(v);
    std::ostringstream os;
    if (!view.landmarks.empty()) {
      const auto& lm = view.landmarks.front();
      os << lm.name << " at " << std::fixed << std::setprecision(1)
         << lm.distance << " m";
    } else if (!view.obstacles.empty()) {
      const auto& ob = view.obstacles.front();
      os << ob.name << " at " << std::fixed << std::setprecision(1)
         << ob.distance << " m";
    } else {
      os << "open space";
    }
    env.summaries[static_cast<int>(v)] = os.str();
  }

  for (auto v : kAllViews) {
    const auto& view = views[static_cast<int>(v)];
    for (const auto& lm : view.landmarks)
      env.salient.push_back(SalientEntry{lm.name, lm.bearing, lm.distance,
                                         tokens_overlap(lm.name, subtask.target)});
    for (const auto& ob : view.obstacles)
      env.salient.push_back(SalientEntry{ob.name, ob.bearing, ob.distance,
                                         tokens_overlap(ob.name, subtask.target)});
  }
  std::sort(env.salient.begin(), env.salient.end(),
            [](const SalientEntry& a, const SalientEntry& b) {
              if (a.task_relevant != b.task_relevant) return a.task_relevant;
              if (a.distance != b.distance) return a.distance < b.distance;
              if (a.name != b.name) return a.name < b.name;
              return a.bearing < b.bearing;
            });
  return env;
}

namespace {

Action turn_toward(ViewDir quadrant) {
  switch (quadrant) {
    case ViewDir::Left: return Action::TurnLeft90;
    case ViewDir::Right: return Action::TurnRight90;
    case ViewDir::Back: return Action::TurnRight90;  // first of two turns
    case ViewDir::Front: return Action::MoveForward;
  }
  throw std::logic_error("unknown quadrant");
}

// Coordinate of the candidate waypoint in a given view direction.
Coordinate candidate_of(const Pose& pose, double delta, ViewDir v) {
  return candidates(pose, delta)[static_cast<int>(v)];
}

Action hop_action(const Pose& pose, Coordinate hop, bool front_traversable) {
  double bearing = bearing_from(pose, hop.x, hop.y);
  ViewDir q = bearing_quadrant(bearing);
  if (q == ViewDir::Front) {
    if (!front_traversable) return Action::Stop;  // caller treats as unusable
    return Action::MoveForward;
  }
  return turn_toward(q);
}

}  // namespace

namespace {

// BFS tree over the topo graph from the current node: hop distance and the
// canonical first hop for every reachable node (neighbors expand in sorted
// order, so the tree is deterministic).
struct RouteTree {
  std::map<NodeId, int> dist;
  std::map<NodeId, NodeId> first_hop;
};

RouteTree route_tree(const TopoGraph& topo, NodeId cur) {
  RouteTree t;
  t.dist[cur] = 0;
  std::deque<NodeId> q{cur};
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop_front();
    for (NodeId nb : topo.neighbors(v)) {
      if (t.dist.count(nb)) continue;
      t.dist[nb] = t.dist[v] + 1;
      t.first_hop[nb] = (v == cur) ? nb : t.first_hop[v];
      q.push_back(nb);
    }
  }
  return t;
}

int turn_cost_of(const Pose& pose, Coordinate hop) {
  switch (bearing_quadrant(bearing_from(pose, hop.x, hop.y))) {
    case ViewDir::Front: return 0;
    case ViewDir::Left:
    case ViewDir::Right: return 1;
    default: return 2;
  }
}

}  // namespace

Decision ScriptedController::decide(const SubTask& subtask,
                                    const EnvDescription& env,
                                    const AgentMap& map,
                                    const std::vector<HistoryRecord>& window,
                                    const SubTaskPlan& plan,
                                    const DecideContext& ctx) {
  Decision d;
  if (plan.all_done()) {
    d.action = Action::Stop;
    d.justification = "all sub-tasks done";
    return d;
  }

  bool any_traversable = !env.traversable_dirs.empty();
  if (!any_traversable) throw DeadlockSignal();

  const Pose* pose = map.geo.trajectory.empty() ? nullptr
                                                : &map.geo.trajectory.back();

  // Sighting memory: anchor every named entity at its estimated coordinate.
  if (pose) {
    for (const auto& e : env.salient) {
      if (e.name == "wall" || e.name == "glass") continue;
      double ang = (static_cast<double>(pose->heading) + e.bearing) *
                   3.14159265358979323846 / 180.0;
      seen_[e.name] = Coordinate{pose->x + e.distance * std::cos(ang),
                                 pose->y + e.distance * std::sin(ang)};
    }
  }

  Action last_action = window.empty() ? Action::Stop : window.back().action;
  auto oscillating = [&](Action steer) {
    return (steer == Action::TurnLeft90 && last_action == Action::TurnRight90) ||
           (steer == Action::TurnRight90 && last_action == Action::TurnLeft90);
  };

  // Steering: head for the nearest task-relevant salient entry.
  const SalientEntry* target_entry = nullptr;
  for (const auto& e : env.salient) {
    if (e.task_relevant) {
      target_entry = &e;
      break;  // salient is sorted relevant-first, nearest-first
    }
  }

  if (target_entry) {
    ViewDir q = bearing_quadrant(target_entry->bearing);
    Action steer = turn_toward(q);
    if (steer == Action::MoveForward) {
      if (env.traversable(ViewDir::Front)) {
        d.action = Action::MoveForward;
        d.justification = "toward " + target_entry->name;
        return d;
      }
      // direct approach blocked; fall through to exploration
    } else if (!oscillating(steer)) {
      d.action = steer;
      d.justification = "turn toward " + target_entry->name;
      return d;
    }
  }

  std::optional<RouteTree> tree;
  std::optional<NodeId> cur;
  if (ctx.use_topo && ctx.use_geo && pose) {
    cur = map.find_node(Coordinate{pose->x, pose->y});
    if (cur) tree = route_tree(map.topo, *cur);
  }

  // Remembered target: route to the sighting of the sub-task target noted
  // earlier in the episode.
  if (!target_entry && pose) {
    const std::string* goal_name = nullptr;
    for (const auto& [name, coord] : seen_) {
      if (tokens_overlap(name, subtask.target)) {
        goal_name = &name;
        break;
      }
    }
    if (goal_name) {
      const std::string gname = *goal_name;
      Coordinate goal = seen_.at(gname);
      if (euclid(pose->x, pose->y, goal.x, goal.y) <= ctx.delta + 1e-9) {
        seen_.erase(gname);  // stale sighting; resume exploring
      } else {
        if (tree) {
          // nearest reachable node to the remembered coordinate
          NodeId best = -1;
          double best_d = std::numeric_limits<double>::infinity();
          for (const auto& [id, c] : map.geo.node_registry) {
            if (!tree->dist.count(id) || id == *cur) continue;
            double dd = euclid(c.x, c.y, goal.x, goal.y);
            if (dd < best_d - 1e-12 || (std::abs(dd - best_d) <= 1e-12 && id < best)) {
              best_d = dd;
              best = id;
            }
          }
          if (best >= 0 && tree->first_hop.count(best)) {
            Coordinate hop = map.geo.node_registry.at(tree->first_hop.at(best));
            Action a = hop_action(*pose, hop, env.traversable(ViewDir::Front));
            if (a != Action::Stop && !oscillating(a)) {
              d.action = a;
              d.justification = "toward remembered " + gname;
              d.candidate_refs = {tree->first_hop.at(best)};
              return d;
            }
          }
        }
        Action steer = turn_toward(
            bearing_quadrant(bearing_from(*pose, goal.x, goal.y)));
        if (steer == Action::MoveForward) {
          if (env.traversable(ViewDir::Front)) {
            d.action = Action::MoveForward;
            d.justification = "toward remembered " + gname;
            return d;
          }
        } else if (!oscillating(steer)) {
          d.action = steer;
          d.justification = "toward remembered " + gname;
          return d;
        }
      }
    }
  }

  // Exploration: walk to the nearest frontier node. Among equally near
  // frontiers prefer the one whose first hop needs the least turning, so
  // the sweep keeps its direction while new candidates appear.
  if (tree && pose) {
    std::vector<std::tuple<int, int, NodeId>> frontier;
    for (const auto& [id, coord] : map.geo.node_registry) {
      if (map.visited(coord)) continue;
      auto it = tree->dist.find(id);
      if (it == tree->dist.end()) continue;
      frontier.push_back(
          {it->second,
           turn_cost_of(*pose, map.geo.node_registry.at(tree->first_hop.at(id))),
           id});
    }
    std::sort(frontier.begin(), frontier.end());
    for (const auto& [hops, cost, id] : frontier) {
      Coordinate hop = map.geo.node_registry.at(tree->first_hop.at(id));
      Action a = hop_action(*pose, hop, env.traversable(ViewDir::Front));
      if (a == Action::Stop) continue;  // front hop not traversable now
      d.action = a;
      d.justification = "explore toward node " + std::to_string(id);
      d.candidate_refs = {tree->first_hop.at(id)};
      return d;
    }
  }

  // Fallback sweep: prefer unvisited candidate cells, order F, R, L, B.
  auto unvisited = [&](ViewDir v) {
    if (!ctx.use_geo || !pose) return true;  // no map: treat all as new
    return !map.visited(candidate_of(*pose, ctx.delta, v));
  };
  if (env.traversable(ViewDir::Front) && unvisited(ViewDir::Front)) {
    d.action = Action::MoveForward;
    d.justification = "advance into unexplored cell";
    return d;
  }
  const std::array<std::pair<ViewDir, Action>, 3> turn_order = {
      std::make_pair(ViewDir::Right, Action::TurnRight90),
      std::make_pair(ViewDir::Left, Action::TurnLeft90),
      std::make_pair(ViewDir::Back, Action::TurnRight90)};
  for (const auto& [v, a] : turn_order) {
    if (env.traversable(v) && unvisited(v)) {
      bool oscillating =
          (a == Action::TurnLeft90 && last_action == Action::TurnRight90) ||
          (a == Action::TurnRight90 && last_action == Action::TurnLeft90);
      if (oscillating) continue;
      d.action = a;
      d.justification = "turn toward unexplored " + to_string(v);
      return d;
    }
  }
  if (env.traversable(ViewDir::Front)) {
    d.action = Action::MoveForward;
    d.justification = "advance";
    return d;
  }
  for (const auto& [v, a] : turn_order) {
    if (env.traversable(v)) {
      d.action = a;
      d.justification = "turn toward " + to_string(v);
      return d;
    }
  }
  throw DeadlockSignal();
}

}  // namespace conav
