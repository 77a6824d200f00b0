#pragma once

// Brute-force filter over the full joint law of X(t). Exponential in n; used
// to check the factorized filter, not in the control loop.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "sisctl/errors.hpp"
#include "sisctl/filter.hpp"
#include "sisctl/graph.hpp"
#include "sisctl/sis.hpp"

namespace sisctl {

inline constexpr std::size_t kMaxOracleNodes = 20;

/// Probability of each joint state; bit i of the index is X_i.
struct JointBelief {
  std::vector<double> probs;
  std::size_t t = 0;

  std::size_t node_count() const { return static_cast<std::size_t>(std::countr_zero(probs.size())); }

  static std::size_t state_count(std::size_t n) {
    if (n == 0 || n > kMaxOracleNodes)
      throw std::length_error("exact oracle supports 1.." + std::to_string(kMaxOracleNodes) + " nodes");
    return std::size_t{1} << n;
  }

  static std::uint32_t index_of(std::span<const std::uint8_t> x) {
    std::uint32_t s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i]) s |= std::uint32_t{1} << i;
    return s;
  }

  static JointBelief point_mass(std::span<const std::uint8_t> x) {
    JointBelief jb{std::vector<double>(state_count(x.size()), 0.0), 0};
    jb.probs[index_of(x)] = 1.0;
    return jb;
  }

  /// Independent nodes with the given infection probabilities.
  static JointBelief product(std::span<const double> marginal) {
    JointBelief jb{std::vector<double>(state_count(marginal.size()), 0.0), 0};
    jb.probs[0] = 1.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
      const std::size_t half = std::size_t{1} << i;
      for (std::size_t s = 0; s < half; ++s) {
        jb.probs[s | half] = jb.probs[s] * marginal[i];
        jb.probs[s] *= 1.0 - marginal[i];
      }
    }
    return jb;
  }
};

namespace detail {

inline void normalize(std::vector<double>& p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
}

}  // namespace detail

/// Exact one-step law of X(t+1) under the given parameters.
inline JointBelief joint_pushforward(const JointBelief& jb, const SpreadingGraph& g, const SISParams& params) {
  const std::size_t n = g.node_count();
  const std::size_t states = JointBelief::state_count(n);
  if (jb.probs.size() != states) throw std::invalid_argument("joint belief size does not match graph");
  JointBelief out{std::vector<double>(states, 0.0), jb.t + 1};
  std::vector<double> branch(states);
  std::vector<std::uint8_t> x(n);
  std::vector<double> q(n);
  for (std::size_t s = 0; s < states; ++s) {
    const double mass = jb.probs[s];
    if (mass == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) x[i] = (s >> i) & 1U;
    for (NodeId i = 0; i < n; ++i) q[i] = next_infection_prob(g, params, x, i);
    // Nodes transition independently given x, so the destination law is a product.
    branch[0] = mass;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t half = std::size_t{1} << i;
      for (std::size_t d = 0; d < half; ++d) {
        branch[d | half] = branch[d] * q[i];
        branch[d] *= 1.0 - q[i];
      }
    }
    for (std::size_t d = 0; d < states; ++d) out.probs[d] += branch[d];
  }
  detail::normalize(out.probs);
  return out;
}

/// Bayes conditioning on the observed slice.
inline JointBelief condition_on_observation(const JointBelief& jb, const ObserverSet& o, const Observation& obs) {
  const std::size_t n = o.node_count();
  if (jb.probs.size() != JointBelief::state_count(n)) throw std::invalid_argument("joint belief size mismatch");
  std::uint32_t mask = 0, want = 0;
  for (NodeId i = 0; i < n; ++i) {
    if (!o.contains(i)) continue;
    mask |= std::uint32_t{1} << i;
    if (obs.value[i]) want |= std::uint32_t{1} << i;
  }
  JointBelief out{std::vector<double>(jb.probs.size(), 0.0), jb.t};
  double total = 0.0;
  for (std::uint32_t s = 0; s < jb.probs.size(); ++s) {
    if ((s & mask) != want) continue;
    out.probs[s] = jb.probs[s];
    total += jb.probs[s];
  }
  if (total < 1e-15) throw ZeroProbabilityEvidence("observation has probability " + std::to_string(total));
  for (double& v : out.probs) v /= total;
  return out;
}

inline std::vector<double> marginals(const JointBelief& jb) {
  const std::size_t n = jb.node_count();
  std::vector<double> m(n, 0.0);
  for (std::size_t s = 0; s < jb.probs.size(); ++s) {
    if (jb.probs[s] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      if ((s >> i) & 1U) m[i] += jb.probs[s];
  }
  return m;
}

/// Total-variation distance between the joint law of the unobserved nodes and
/// the product of their marginals.
inline double product_of_marginals_distance(const JointBelief& jb, const ObserverSet& o) {
  const std::size_t n = jb.node_count();
  std::vector<std::size_t> hidden;
  for (NodeId i = 0; i < n; ++i)
    if (!o.contains(i)) hidden.push_back(i);
  const std::size_t sub_states = std::size_t{1} << hidden.size();

  std::vector<double> joint(sub_states, 0.0);
  for (std::size_t s = 0; s < jb.probs.size(); ++s) {
    std::size_t sub = 0;
    for (std::size_t h = 0; h < hidden.size(); ++h)
      if ((s >> hidden[h]) & 1U) sub |= std::size_t{1} << h;
    joint[sub] += jb.probs[s];
  }
  std::vector<double> m(hidden.size(), 0.0);
  for (std::size_t sub = 0; sub < sub_states; ++sub)
    for (std::size_t h = 0; h < hidden.size(); ++h)
      if ((sub >> h) & 1U) m[h] += joint[sub];

  double l1 = 0.0;
  for (std::size_t sub = 0; sub < sub_states; ++sub) {
    double prod = 1.0;
    for (std::size_t h = 0; h < hidden.size(); ++h) prod *= ((sub >> h) & 1U) ? m[h] : 1.0 - m[h];
    l1 += std::abs(joint[sub] - prod);
  }
  return 0.5 * l1;
}

}  // namespace sisctl
