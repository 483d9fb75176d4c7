#include "conav/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace conav {

namespace {

// cos/sin for cardinal angles, exact.
std::pair<int, int> unit_for(int deg) { return heading_unit(deg); }

double snap(double v) {
  // Round to the 1e-9 coordinate grid so candidate coordinates from
  // different poses compare exactly.
  return std::round(v * 1e9) / 1e9;
}

}  // namespace

std::array<Coordinate, 4> candidates(const Pose& pose, double delta) {
  if (delta <= 0) throw std::invalid_argument("delta must be positive");
  std::array<Coordinate, 4> out;
  for (int i = 0; i < 4; ++i) {
    auto [cx, cy] = unit_for(normalize_heading(pose.heading - i * 90));
    out[i] = Coordinate{snap(pose.x + delta * cx), snap(pose.y + delta * cy)};
  }
  return out;
}

void TopoGraph::add_node(NodeId v) {
  adjacency_.try_emplace(v);
}

void TopoGraph::connect(NodeId v_c, NodeId v_i) {
  if (v_c == v_i) throw SelfLoopError();
  if (!has_node(v_c))
    throw UnknownNodeError("connect: unknown node " + std::to_string(v_c));
  add_node(v_i);
  auto key = std::minmax(v_c, v_i);
  if (!edge_set_.insert({key.first, key.second}).second) return;
  adjacency_[v_c].push_back(v_i);
  adjacency_[v_i].push_back(v_c);
  std::sort(adjacency_[v_c].begin(), adjacency_[v_c].end());
  std::sort(adjacency_[v_i].begin(), adjacency_[v_i].end());
}

const std::vector<NodeId>& TopoGraph::neighbors(NodeId v) const {
  auto it = adjacency_.find(v);
  if (it == adjacency_.end())
    throw UnknownNodeError("neighbors: unknown node " + std::to_string(v));
  return it->second;
}

std::vector<NodeId> TopoGraph::nodes() const {
  std::vector<NodeId> out;
  out.reserve(adjacency_.size());
  for (const auto& [v, _] : adjacency_) out.push_back(v);
  return out;
}

std::vector<std::pair<NodeId, NodeId>> TopoGraph::edges() const {
  return {edge_set_.begin(), edge_set_.end()};
}

std::vector<NodeId> TopoGraph::shortest_path(NodeId from, NodeId to) const {
  if (!has_node(from))
    throw UnknownNodeError("shortest_path: unknown node " + std::to_string(from));
  if (!has_node(to))
    throw UnknownNodeError("shortest_path: unknown node " + std::to_string(to));
  if (from == to) return {from};

  // BFS from the target gives hop distances; walking greedily from `from`
  // and always taking the smallest-id neighbor one hop closer yields the
  // lexicographically smallest shortest path.
  std::map<NodeId, int> dist{{to, 0}};
  std::deque<NodeId> q{to};
  while (!q.empty()) {
    NodeId cur = q.front();
    q.pop_front();
    for (NodeId nb : neighbors(cur)) {
      if (dist.count(nb)) continue;
      dist[nb] = dist[cur] + 1;
      q.push_back(nb);
    }
  }
  if (!dist.count(from)) throw UnreachableError("no path between nodes");

  std::vector<NodeId> path{from};
  NodeId cur = from;
  while (cur != to) {
    NodeId next = -1;
    for (NodeId nb : neighbors(cur)) {  // neighbors are kept sorted
      auto it = dist.find(nb);
      if (it != dist.end() && it->second == dist[cur] - 1) {
        next = nb;
        break;
      }
    }
    path.push_back(next);
    cur = next;
  }
  return path;
}

std::pair<long long, long long> AgentMap::quantize(Coordinate c) {
  return {std::llround(c.x / kDedupTolerance),
          std::llround(c.y / kDedupTolerance)};
}

std::optional<NodeId> AgentMap::find_node(Coordinate c) const {
  auto it = coord_index_.find(quantize(c));
  if (it == coord_index_.end()) return std::nullopt;
  return it->second;
}

NodeId AgentMap::register_node(Coordinate c) {
  auto key = quantize(c);
  auto it = coord_index_.find(key);
  if (it != coord_index_.end()) return it->second;
  NodeId id = next_id_++;
  coord_index_[key] = id;
  geo.node_registry[id] = c;
  topo.add_node(id);
  return id;
}

std::array<NodeId, 4> AgentMap::register_candidates(const Pose& pose,
                                                    double delta) {
  auto coords = candidates(pose, delta);
  std::array<NodeId, 4> ids{};
  for (int i = 0; i < 4; ++i) ids[i] = register_node(coords[i]);
  return ids;
}

void AgentMap::record_pose(const Pose& p) {
  geo.trajectory.push_back(p);
  visited_.insert(quantize(Coordinate{p.x, p.y}));
}

bool AgentMap::visited(Coordinate c) const {
  return visited_.count(quantize(c)) > 0;
}

json AgentMap::snapshot() const {
  json j;
  json traj = json::array();
  for (const auto& p : geo.trajectory)
    traj.push_back(json::array({p.x, p.y, p.heading}));
  j["trajectory"] = traj;
  json nodes = json::object();
  for (const auto& [id, c] : geo.node_registry)
    nodes[std::to_string(id)] = json::array({c.x, c.y});
  j["nodes"] = nodes;
  json edges = json::array();
  for (const auto& [a, b] : topo.edges()) edges.push_back(json::array({a, b}));
  j["edges"] = edges;
  return j;
}

AgentMap AgentMap::from_snapshot(const json& j) {
  AgentMap m;
  for (const auto& [key, val] : j.at("nodes").items()) {
    NodeId id = std::stoi(key);
    Coordinate c{val.at(0).get<double>(), val.at(1).get<double>()};
    m.coord_index_[quantize(c)] = id;
    m.geo.node_registry[id] = c;
    m.topo.add_node(id);
    m.next_id_ = std::max(m.next_id_, id + 1);
  }
  for (const auto& e : j.at("edges"))
    m.topo.connect(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
  for (const auto& p : j.at("trajectory")) {
    Pose pose{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<int>()};
    m.record_pose(pose);
  }
  return m;
}

}  // namespace conav
