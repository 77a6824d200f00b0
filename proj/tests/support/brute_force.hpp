#pragma once

// Slow reference implementations used only by the tests.

#include <cstddef>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "sisctl/graph.hpp"

namespace sisctl::testing {

// Moral edges straight from the definition: every directed edge, plus every
// pair of distinct nodes with a common out-neighbor.
inline std::set<std::pair<NodeId, NodeId>> moral_edges_by_definition(const SpreadingGraph& g) {
  std::set<std::pair<NodeId, NodeId>> out;
  const auto n = static_cast<NodeId>(g.node_count());
  auto add = [&](NodeId a, NodeId b) { out.insert({std::min(a, b), std::max(a, b)}); };
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = 0; v < n; ++v) {
      if (u == v) continue;
      if (g.find_edge(u, v)) add(u, v);
      for (NodeId k = 0; k < n; ++k)
        if (u < v && g.find_edge(u, k) && g.find_edge(v, k)) add(u, v);
    }
  return out;
}

// Smallest vertex cover size by trying every subset.
inline std::size_t exhaustive_min_cover_size(const MoralGraph& m) {
  const std::size_t n = m.node_count();
  std::size_t best = n;
  for (std::uint32_t s = 0; s < (std::uint32_t{1} << n); ++s) {
    bool ok = true;
    for (auto [u, v] : m.edges())
      if (!((s >> u) & 1U) && !((s >> v) & 1U)) {
        ok = false;
        break;
      }
    if (ok) best = std::min<std::size_t>(best, static_cast<std::size_t>(__builtin_popcount(s)));
  }
  return best;
}

inline SpreadingGraph star(std::size_t k) {
  std::vector<Edge> e;
  for (NodeId leaf = 1; leaf < k; ++leaf) e.push_back({0, leaf});
  return SpreadingGraph(k, e);
}

inline SpreadingGraph complete(std::size_t k) {
  std::vector<Edge> e;
  for (NodeId u = 0; u < k; ++u)
    for (NodeId v = 0; v < k; ++v)
      if (u != v) e.push_back({u, v});
  return SpreadingGraph(k, e);
}

}  // namespace sisctl::testing
