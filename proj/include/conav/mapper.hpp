#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conav/scenario.hpp"
#include "conav/types.hpp"

namespace conav {

using NodeId = int;

struct Coordinate {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Coordinate& o) const { return x == o.x && y == o.y; }
};

// Four candidate waypoints at distance delta in the Front/Right/Back/Left
// directions of the pose. Exact for cardinal headings.
std::array<Coordinate, 4> candidates(const Pose& pose, double delta);

struct SelfLoopError : std::runtime_error {
  SelfLoopError() : std::runtime_error("self-loop edge rejected") {}
};
struct UnreachableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownNodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incremental coordinate record: traversed poses plus registered nodes.
struct GeometricMap {
  std::vector<Pose> trajectory;
  std::map<NodeId, Coordinate> node_registry;
};

// Connectivity graph over registered nodes; edges are undirected.
class TopoGraph {
 public:
  bool has_node(NodeId v) const { return adjacency_.count(v) > 0; }
  void add_node(NodeId v);
  // Adds edge (v_c, v_i), inserting v_i when new. Idempotent.
  void connect(NodeId v_c, NodeId v_i);
  const std::vector<NodeId>& neighbors(NodeId v) const;
  std::vector<NodeId> nodes() const;
  std::vector<std::pair<NodeId, NodeId>> edges() const;
  size_t node_count() const { return adjacency_.size(); }
  size_t edge_count() const { return edge_set_.size(); }

  // Minimum-hop path inclusive of endpoints; equal-length ties resolved by
  // lexicographically smallest node-id sequence.
  std::vector<NodeId> shortest_path(NodeId from, NodeId to) const;

 private:
  std::map<NodeId, std::vector<NodeId>> adjacency_;
  std::set<std::pair<NodeId, NodeId>> edge_set_;  // normalized (min,max)
};

// The control agent's internal map: geometric record plus topology.
class AgentMap {
 public:
  GeometricMap geo;
  TopoGraph topo;

  // Resolves a coordinate to its node, creating one if none lies within the
  // dedup tolerance. Never reuses ids.
  NodeId register_node(Coordinate c);
  std::optional<NodeId> find_node(Coordinate c) const;

  // Registers the four quadrature candidates of `pose`; returns their ids in
  // Front/Right/Back/Left order. Adds no edges.
  std::array<NodeId, 4> register_candidates(const Pose& pose, double delta);

  void record_pose(const Pose& p);

  bool visited(Coordinate c) const;

  json snapshot() const;  // {trajectory, nodes, edges}
  static AgentMap from_snapshot(const json& j);

  static constexpr double kDedupTolerance = 1e-6;

 private:
  NodeId next_id_ = 1;
  std::map<std::pair<long long, long long>, NodeId> coord_index_;
  std::set<std::pair<long long, long long>> visited_;

  static std::pair<long long, long long> quantize(Coordinate c);
};

}  // namespace conav
