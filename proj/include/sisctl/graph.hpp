#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sisctl/errors.hpp"

namespace sisctl {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

/// Directed edge: `source` can infect `target`.
struct Edge {
  NodeId source;
  NodeId target;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One adjacency entry: the node on the other end and the id of the edge.
struct Arc {
  NodeId node;
  EdgeId edge;
};

/// Immutable directed spreading graph over nodes 0..n-1.
///
/// Edge ids are positions in the lexicographically sorted edge list, so every
/// per-edge quantity (infection rates, transformed variables) is a dense
/// vector indexed by EdgeId.
class SpreadingGraph {
 public:
  SpreadingGraph(std::size_t node_count, std::vector<Edge> edges) : n_(node_count), edges_(std::move(edges)) {
    if (n_ == 0) throw std::invalid_argument("spreading graph needs at least one node");
    for (const Edge& e : edges_) {
      if (e.source >= n_ || e.target >= n_)
        throw std::invalid_argument("edge (" + std::to_string(e.source) + "," + std::to_string(e.target) +
                                    ") references a node outside 0.." + std::to_string(n_ - 1));
      if (e.source == e.target) throw std::invalid_argument("self-loop at node " + std::to_string(e.source));
    }
    std::sort(edges_.begin(), edges_.end());
    if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end())
      throw std::invalid_argument("duplicate edge (" + std::to_string(dup->source) + "," +
                                  std::to_string(dup->target) + ")");
    build_index();
  }

  std::size_t node_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }

  std::span<const Arc> in_arcs(NodeId i) const {
    return {in_.data() + in_offset_[i], in_offset_[i + 1] - in_offset_[i]};
  }
  std::span<const Arc> out_arcs(NodeId i) const {
    return {out_.data() + out_offset_[i], out_offset_[i + 1] - out_offset_[i]};
  }
  std::size_t in_degree(NodeId i) const { return in_offset_[i + 1] - in_offset_[i]; }
  std::size_t out_degree(NodeId i) const { return out_offset_[i + 1] - out_offset_[i]; }

  /// Maximum in-degree (d_max).
  std::size_t max_in_degree() const noexcept { return d_max_; }

  std::optional<EdgeId> find_edge(NodeId source, NodeId target) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{source, target});
    if (it == edges_.end() || *it != Edge{source, target}) return std::nullopt;
    return static_cast<EdgeId>(it - edges_.begin());
  }

 private:
  void build_index() {
    in_offset_.assign(n_ + 1, 0);
    out_offset_.assign(n_ + 1, 0);
    for (const Edge& e : edges_) {
      ++in_offset_[e.target + 1];
      ++out_offset_[e.source + 1];
    }
    for (std::size_t i = 0; i < n_; ++i) {
      in_offset_[i + 1] += in_offset_[i];
      out_offset_[i + 1] += out_offset_[i];
    }
    in_.resize(edges_.size());
    out_.resize(edges_.size());
    std::vector<std::size_t> in_fill(in_offset_.begin(), in_offset_.end() - 1);
    std::vector<std::size_t> out_fill(out_offset_.begin(), out_offset_.end() - 1);
    // Sorted edge order keeps both adjacency lists sorted by neighbor id.
    for (EdgeId id = 0; id < edges_.size(); ++id) {
      const Edge& e = edges_[id];
      out_[out_fill[e.source]++] = Arc{e.target, id};
    }
    std::vector<EdgeId> by_target(edges_.size());
    for (EdgeId id = 0; id < edges_.size(); ++id) by_target[id] = id;
    std::stable_sort(by_target.begin(), by_target.end(),
                     [&](EdgeId a, EdgeId b) { return edges_[a].target < edges_[b].target; });
    for (EdgeId id : by_target) {
      const Edge& e = edges_[id];
      in_[in_fill[e.target]++] = Arc{e.source, id};
    }
    d_max_ = 0;
    for (std::size_t i = 0; i < n_; ++i) d_max_ = std::max(d_max_, in_offset_[i + 1] - in_offset_[i]);
  }

  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> in_offset_, out_offset_;
  std::vector<Arc> in_, out_;
  std::size_t d_max_ = 0;
};

/// Undirected graph; edges stored once as (u, v) with u < v, sorted.
class MoralGraph {
 public:
  MoralGraph(std::size_t node_count, std::vector<std::pair<NodeId, NodeId>> edges)
      : n_(node_count), edges_(std::move(edges)) {
    for (auto& [u, v] : edges_) {
      if (u >= n_ || v >= n_ || u == v) throw std::invalid_argument("invalid undirected edge");
      if (u > v) std::swap(u, v);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    offset_.assign(n_ + 1, 0);
    for (auto [u, v] : edges_) {
      ++offset_[u + 1];
      ++offset_[v + 1];
    }
    for (std::size_t i = 0; i < n_; ++i) offset_[i + 1] += offset_[i];
    adj_.resize(2 * edges_.size());
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    for (auto [u, v] : edges_) {
      adj_[fill[u]++] = v;
      adj_[fill[v]++] = u;
    }
    for (std::size_t i = 0; i < n_; ++i)
      std::sort(adj_.begin() + static_cast<std::ptrdiff_t>(offset_[i]),
                adj_.begin() + static_cast<std::ptrdiff_t>(offset_[i + 1]));
  }

  std::size_t node_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const std::pair<NodeId, NodeId>> edges() const noexcept { return edges_; }
  std::span<const NodeId> neighbors(NodeId i) const {
    return {adj_.data() + offset_[i], offset_[i + 1] - offset_[i]};
  }
  bool has_edge(NodeId u, NodeId v) const {
    if (u > v) std::swap(u, v);
    return std::binary_search(edges_.begin(), edges_.end(), std::pair{u, v});
  }

 private:
  std::size_t n_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::size_t> offset_;
  std::vector<NodeId> adj_;
};

/// Set of observed nodes, stored as a membership mask.
class ObserverSet {
 public:
  explicit ObserverSet(std::size_t node_count = 0) : mask_(node_count, 0) {}

  static ObserverSet all(std::size_t node_count) {
    ObserverSet o(node_count);
    std::fill(o.mask_.begin(), o.mask_.end(), 1);
    return o;
  }

  static ObserverSet of(std::size_t node_count, std::span<const NodeId> members) {
    ObserverSet o(node_count);
    for (NodeId i : members) {
      if (i >= node_count) throw std::invalid_argument("observer " + std::to_string(i) + " out of range");
      o.insert(i);
    }
    return o;
  }

  std::size_t node_count() const noexcept { return mask_.size(); }
  bool contains(NodeId i) const { return mask_[i] != 0; }
  void insert(NodeId i) { mask_[i] = 1; }
  void erase(NodeId i) { mask_[i] = 0; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1)); }

  std::vector<NodeId> members() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < mask_.size(); ++i)
      if (mask_[i]) out.push_back(i);
    return out;
  }

  friend bool operator==(const ObserverSet&, const ObserverSet&) = default;

 private:
  std::vector<std::uint8_t> mask_;
};

/// Drops edge directions and joins every pair of co-parents (nodes with a
/// common out-neighbor).
inline MoralGraph moralize(const SpreadingGraph& g) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const Edge& e : g.edges()) pairs.emplace_back(e.source, e.target);
  for (NodeId k = 0; k < g.node_count(); ++k) {
    auto parents = g.in_arcs(k);
    for (std::size_t a = 0; a < parents.size(); ++a)
      for (std::size_t b = a + 1; b < parents.size(); ++b) pairs.emplace_back(parents[a].node, parents[b].node);
  }
  return MoralGraph(g.node_count(), std::move(pairs));
}

inline bool is_vertex_cover(const MoralGraph& m, const ObserverSet& o) {
  if (o.node_count() != m.node_count()) throw std::invalid_argument("observer mask length does not match graph");
  return std::all_of(m.edges().begin(), m.edges().end(),
                     [&](const auto& e) { return o.contains(e.first) || o.contains(e.second); });
}

/// Both endpoints of a maximal matching, edges scanned in sorted order.
/// Always a cover, and at most twice the minimum.
inline ObserverSet maximal_matching_cover(const MoralGraph& m) {
  ObserverSet cover(m.node_count());
  for (auto [u, v] : m.edges()) {
    if (!cover.contains(u) && !cover.contains(v)) {
      cover.insert(u);
      cover.insert(v);
    }
  }
  return cover;
}

/// maximal_matching_cover followed by a pruning pass that drops, in ascending
/// id order, every member whose neighbors are all still covered. The result
/// stays a cover and never grows.
inline ObserverSet approx_min_cover(const MoralGraph& m) {
  ObserverSet cover = maximal_matching_cover(m);
  for (NodeId i = 0; i < m.node_count(); ++i) {
    if (!cover.contains(i)) continue;
    auto nbrs = m.neighbors(i);
    if (std::all_of(nbrs.begin(), nbrs.end(), [&](NodeId j) { return cover.contains(j); })) cover.erase(i);
  }
  return cover;
}

/// The unique unobserved in-neighbor of an observed node, if any. Two or more
/// unobserved in-neighbors means the observer set does not cover mor(G).
inline std::optional<NodeId> unobserved_in_neighbor(const SpreadingGraph& g, const ObserverSet& o, NodeId i) {
  std::optional<NodeId> found;
  for (const Arc& a : g.in_arcs(i)) {
    if (o.contains(a.node)) continue;
    if (found)
      throw CoverViolation("node " + std::to_string(i) + " has unobserved in-neighbors " + std::to_string(*found) +
                               " and " + std::to_string(a.node),
                           i);
    found = a.node;
  }
  return found;
}

}  // namespace sisctl
