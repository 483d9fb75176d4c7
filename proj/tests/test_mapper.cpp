#include <doctest.h>

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "conav/mapper.hpp"

using namespace conav;

namespace {

// Exhaustive shortest-path oracle: BFS distances, then DFS enumeration of
// every minimum-hop path, picking the lexicographically smallest sequence.
std::vector<NodeId> brute_shortest(const TopoGraph& g, NodeId from, NodeId to) {
  std::map<NodeId, int> dist{{from, 0}};
  std::deque<NodeId> q{from};
  while (!q.empty()) {
    NodeId cur = q.front();
    q.pop_front();
    for (NodeId nb : g.neighbors(cur)) {
      if (dist.count(nb)) continue;
      dist[nb] = dist[cur] + 1;
      q.push_back(nb);
    }
  }
  if (!dist.count(to)) return {};
  std::vector<NodeId> best;
  std::vector<NodeId> path{from};
  std::function<void(NodeId)> dfs = [&](NodeId cur) {
    if (cur == to) {
      if (best.empty() || path < best) best = path;
      return;
    }
    for (NodeId nb : g.neighbors(cur)) {
      auto it = dist.find(nb);
      if (it == dist.end() || it->second != dist[cur] + 1) continue;
      if (static_cast<int>(path.size()) > dist[to]) return;
      path.push_back(nb);
      dfs(nb);
      path.pop_back();
    }
  };
  dfs(from);
  return best;
}

}  // namespace

TEST_CASE("quadrature candidates match the worked pose (2,1,90) exactly") {
  auto c = candidates(Pose{2, 1, 90}, 1.0);
  CHECK(c[0] == Coordinate{2, 2});  // front
  CHECK(c[1] == Coordinate{3, 1});  // right
  CHECK(c[2] == Coordinate{2, 0});  // back
  CHECK(c[3] == Coordinate{1, 1});  // left
}

TEST_CASE("candidates at the origin with heading 0") {
  auto c = candidates(Pose{0, 0, 0}, 1.0);
  CHECK(c[0] == Coordinate{1, 0});
  CHECK(c[1] == Coordinate{0, -1});
  CHECK(c[2] == Coordinate{-1, 0});
  CHECK(c[3] == Coordinate{0, 1});
}

TEST_CASE("candidates scale with delta and follow heading 180") {
  auto c = candidates(Pose{5, 5, 180}, 2.0);
  CHECK(c[0] == Coordinate{3, 5});
  CHECK(c[1] == Coordinate{5, 7});
  CHECK(c[2] == Coordinate{7, 5});
  CHECK(c[3] == Coordinate{5, 3});
}

TEST_CASE("candidates of cardinal poses are exact axis-aligned neighbors") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    double delta = 0.5 + (rng() % 8) * 0.5;
    Pose p{static_cast<double>(static_cast<int>(rng() % 20)) * delta,
           static_cast<double>(static_cast<int>(rng() % 20)) * delta,
           static_cast<int>(rng() % 4) * 90};
    auto c = candidates(p, delta);
    for (int k = 0; k < 4; ++k) {
      double dx = std::abs(c[k].x - p.x);
      double dy = std::abs(c[k].y - p.y);
      bool axis = (dx == delta && dy == 0.0) || (dx == 0.0 && dy == delta);
      CHECK(axis);
    }
    // the four are pairwise distinct
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        CHECK(!(c[a] == c[b]));
  }
}

TEST_CASE("register_candidates creates fresh ids once and reuses them") {
  AgentMap m;
  auto first = m.register_candidates(Pose{2, 1, 90}, 1.0);
  CHECK(m.geo.node_registry.size() == 4);
  CHECK(m.geo.node_registry.at(first[0]) == Coordinate{2, 2});
  auto second = m.register_candidates(Pose{2, 1, 90}, 1.0);
  CHECK(first == second);
  CHECK(m.geo.node_registry.size() == 4);
}

TEST_CASE("two poses sharing a candidate coordinate share the node") {
  AgentMap m;
  auto a = m.register_candidates(Pose{0, 0, 0}, 1.0);   // front (1,0)
  auto b = m.register_candidates(Pose{2, 0, 180}, 1.0); // front (1,0)
  CHECK(a[0] == b[0]);
  std::set<NodeId> unique;
  for (auto id : a) unique.insert(id);
  for (auto id : b) unique.insert(id);
  CHECK(unique.size() == 7);  // 8 candidates, one shared
}

TEST_CASE("connect adds nodes and undirected edges idempotently") {
  TopoGraph g;
  g.add_node(1);
  g.connect(1, 2);
  CHECK(g.node_count() == 2);
  CHECK(g.edge_count() == 1);
  CHECK(g.neighbors(1) == std::vector<NodeId>{2});
  CHECK(g.neighbors(2) == std::vector<NodeId>{1});
  g.connect(1, 2);
  g.connect(2, 1);
  CHECK(g.edge_count() == 1);
  CHECK(g.neighbors(1) == std::vector<NodeId>{2});
}

TEST_CASE("chain adjacency holds at the middle node") {
  TopoGraph g;
  g.add_node(1);
  g.connect(1, 2);
  g.connect(2, 3);
  CHECK(g.neighbors(2) == std::vector<NodeId>{1, 3});
}

TEST_CASE("self-loop edges are rejected") {
  TopoGraph g;
  g.add_node(1);
  CHECK_THROWS_AS(g.connect(1, 1), SelfLoopError);
}

TEST_CASE("shortest path on a chain and the identity path") {
  TopoGraph g;
  g.add_node(1);
  g.connect(1, 2);
  g.connect(2, 3);
  CHECK(g.shortest_path(1, 3) == std::vector<NodeId>{1, 2, 3});
  CHECK(g.shortest_path(1, 1) == std::vector<NodeId>{1});
}

TEST_CASE("diamond ties resolve to the smaller middle node id") {
  TopoGraph g;
  g.add_node(1);
  g.connect(1, 2);
  g.connect(1, 3);
  g.connect(2, 4);
  g.connect(3, 4);
  CHECK(g.shortest_path(1, 4) == std::vector<NodeId>{1, 2, 4});
}

TEST_CASE("unreachable nodes raise") {
  TopoGraph g;
  g.add_node(1);
  g.add_node(7);
  CHECK_THROWS_AS(g.shortest_path(1, 7), UnreachableError);
}

TEST_CASE("shortest_path equals the exhaustive oracle on random graphs") {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 60; ++iter) {
    TopoGraph g;
    int n = 5 + static_cast<int>(rng() % 46);  // up to 50 nodes
    for (int v = 1; v <= n; ++v) g.add_node(v);
    int edges = n + static_cast<int>(rng() % (2 * n));
    for (int e = 0; e < edges; ++e) {
      NodeId a = 1 + static_cast<int>(rng() % n);
      NodeId b = 1 + static_cast<int>(rng() % n);
      if (a != b) g.connect(a, b);
    }
    NodeId from = 1 + static_cast<int>(rng() % n);
    NodeId to = 1 + static_cast<int>(rng() % n);
    auto oracle = brute_shortest(g, from, to);
    if (oracle.empty() && from != to) {
      CHECK_THROWS_AS(g.shortest_path(from, to), UnreachableError);
    } else {
      CHECK(g.shortest_path(from, to) == oracle);
    }
  }
}

TEST_CASE("every topo node has coordinates in the geometric registry") {
  AgentMap m;
  m.register_candidates(Pose{0, 0, 0}, 1.0);
  m.register_candidates(Pose{1, 0, 0}, 1.0);
  NodeId a = *m.find_node(Coordinate{1, 0});
  NodeId b = *m.find_node(Coordinate{2, 0});
  m.topo.connect(a, b);
  for (NodeId v : m.topo.nodes()) CHECK(m.geo.node_registry.count(v) == 1);
}

TEST_CASE("map snapshots round-trip") {
  AgentMap m;
  m.record_pose(Pose{0, 0, 0});
  auto ids = m.register_candidates(Pose{0, 0, 0}, 1.0);
  m.topo.connect(ids[0], ids[3]);
  m.record_pose(Pose{1, 0, 0});
  json snap = m.snapshot();
  AgentMap back = AgentMap::from_snapshot(snap);
  CHECK(back.snapshot() == snap);
  CHECK(back.visited(Coordinate{1, 0}));
  CHECK(!back.visited(Coordinate{0, 1}));
}

TEST_CASE("nodes and edges never shrink while registering and connecting") {
  AgentMap m;
  std::mt19937_64 rng(9);
  size_t last_nodes = 0, last_edges = 0;
  Pose p{0, 0, 0};
  for (int i = 0; i < 100; ++i) {
    auto ids = m.register_candidates(p, 1.0);
    NodeId cur = m.register_node(Coordinate{p.x, p.y});
    for (auto id : ids)
      if (id != cur) m.topo.connect(cur, id);
    CHECK(m.geo.node_registry.size() >= last_nodes);
    CHECK(m.topo.edge_count() >= last_edges);
    last_nodes = m.geo.node_registry.size();
    last_edges = m.topo.edge_count();
    int dir = static_cast<int>(rng() % 4) * 90;
    auto [dx, dy] = heading_unit(dir);
    p = Pose{p.x + dx, p.y + dy, dir};
  }
}
