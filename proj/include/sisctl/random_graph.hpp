#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sisctl/graph.hpp"
#include "sisctl/rng.hpp"

namespace sisctl {

/// Each ordered pair (i, j), i != j, is an edge with probability p. Pairs are
/// visited row-major with one draw each, so the graph depends only on the seed.
inline SpreadingGraph generate_er_graph(std::size_t n, double p, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("random graph needs n >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("connection probability outside [0,1]");
  RngStream rng(seed);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j)
      if (i != j && rng.uniform() < p) edges.push_back({i, j});
  return SpreadingGraph(n, std::move(edges));
}

}  // namespace sisctl
