#pragma once

// Deterministic single-source shortest paths over small directed graphs.

#include "palmplan/core_types.hpp"

#include <functional>
#include <limits>
#include <queue>
#include <vector>

namespace palmplan {

struct WeightedEdge {
  int from = 0;
  int to = 0;
  double cost = 0.0;
};

struct ShortestPath {
  bool found = false;
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> edges;  // indices into the edge list, in travel order
};

/// Dijkstra with non-negative costs. Among equal-cost paths, the one whose
/// final edges appear earlier in the edge list wins (a node's predecessor is
/// only replaced on a strict improvement).
inline ShortestPath dijkstra(int num_nodes, const std::vector<WeightedEdge>& edges, int source, int target) {
  if (source < 0 || source >= num_nodes || target < 0 || target >= num_nodes)
    throw Error(ErrorCode::InvalidArgument, "node index out of range");
  std::vector<std::vector<int>> out(num_nodes);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].cost < 0.0 || !std::isfinite(edges[i].cost))
      throw Error(ErrorCode::InvalidArgument, "edge costs must be finite and non-negative");
    out.at(edges[i].from).push_back(static_cast<int>(i));
  }
  std::vector<double> dist(num_nodes, std::numeric_limits<double>::infinity());
  std::vector<int> pred(num_nodes, -1);
  std::vector<bool> done(num_nodes, false);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u == target) break;
    for (int ei : out[u]) {
      const auto& e = edges[ei];
      const double nd = d + e.cost;
      if (nd < dist[e.to] - 1e-12 * (1.0 + std::abs(nd))) {
        dist[e.to] = nd;
        pred[e.to] = ei;
        queue.push({nd, e.to});
      }
    }
  }
  ShortestPath result;
  if (!std::isfinite(dist[target])) return result;
  result.found = true;
  result.cost = dist[target];
  for (int v = target; v != source; v = edges[pred[v]].from) result.edges.push_back(pred[v]);
  std::reverse(result.edges.begin(), result.edges.end());
  return result;
}

}  // namespace palmplan
