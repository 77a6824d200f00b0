#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sisctl/errors.hpp"
#include "sisctl/graph.hpp"
#include "sisctl/sis.hpp"

namespace sisctl {

/// Observed slice of a process state. Entries outside the observer set are
/// always zero, so nothing downstream can read an unobserved compartment.
struct Observation {
  std::vector<std::uint8_t> value;

  friend bool operator==(const Observation&, const Observation&) = default;
};

inline Observation observe(const ProcessState& state, const ObserverSet& o) {
  Observation obs{std::vector<std::uint8_t>(state.x.size(), 0)};
  for (NodeId i = 0; i < state.x.size(); ++i)
    if (o.contains(i)) obs.value[i] = state.x[i];
  return obs;
}

/// Conditional infection probabilities xhat_i(t|t) given the observation
/// history and the parameters applied up to t-1, together with the observation
/// slices and parameters the next update needs.
struct BeliefState {
  std::vector<double> xhat;
  ObserverSet observers;
  std::size_t t = 0;
  Observation observation;
  std::optional<Observation> previous_observation;
  std::optional<SISParams> last_params;

  double sum() const { return std::accumulate(xhat.begin(), xhat.end(), 0.0); }
};

/// Instrumentation for the per-node inference cost: adjacency entries read.
struct EdgeTouches {
  std::size_t total = 0;
  std::size_t calls = 0;
  std::size_t max_per_call = 0;

  void record(std::size_t touches) {
    total += touches;
    ++calls;
    max_per_call = std::max(max_per_call, touches);
  }
};

/// Observed out-neighbors of an unobserved node that were healthy at t-1,
/// split by their state at t.
struct EvidenceSets {
  std::vector<NodeId> healthy_again;   // K^{00}
  std::vector<NodeId> newly_infected;  // K^{01}
};

inline EvidenceSets evidence_sets(const SpreadingGraph& g, const ObserverSet& o, const Observation& prev_obs,
                                  const Observation& cur_obs, NodeId i) {
  EvidenceSets k;
  for (const Arc& a : g.out_arcs(i)) {
    if (!o.contains(a.node) || prev_obs.value[a.node]) continue;
    (cur_obs.value[a.node] ? k.newly_infected : k.healthy_again).push_back(a.node);
  }
  return k;
}

/// Likelihood of the evidence sets given X_i(t-1) = 1 (`infected`) and
/// X_i(t-1) = 0 (`healthy`).
struct Likelihoods {
  double infected;
  double healthy;
};

namespace detail {

// Probability that observed node k escapes infection from every in-neighbor
// other than `skip`; all of those must be observed.
inline double escape_excluding(const SpreadingGraph& g, const ObserverSet& o, const SISParams& prev_params,
                               const Observation& prev_obs, NodeId k, NodeId skip, std::size_t& touches) {
  double escape = 1.0;
  for (const Arc& a : g.in_arcs(k)) {
    ++touches;
    if (a.node == skip) continue;
    if (!o.contains(a.node))
      throw CoverViolation("node " + std::to_string(k) + " has unobserved in-neighbors " + std::to_string(skip) +
                               " and " + std::to_string(a.node),
                           k);
    if (prev_obs.value[a.node]) escape *= 1.0 - prev_params.beta[a.edge];
  }
  return escape;
}

inline Likelihoods likelihoods_counted(const SpreadingGraph& g, const ObserverSet& o, const SISParams& prev_params,
                                       const Observation& prev_obs, const Observation& cur_obs, NodeId i,
                                       std::size_t& touches) {
  Likelihoods l{1.0, 1.0};
  for (const Arc& a : g.out_arcs(i)) {
    ++touches;
    const NodeId k = a.node;
    if (!o.contains(k) || prev_obs.value[k]) continue;
    const double others = escape_excluding(g, o, prev_params, prev_obs, k, i, touches);
    const double with_i = (1.0 - prev_params.beta[a.edge]) * others;
    if (cur_obs.value[k]) {
      l.infected *= 1.0 - with_i;
      l.healthy *= 1.0 - others;
    } else {
      l.infected *= with_i;
      l.healthy *= others;
    }
  }
  return l;
}

inline void require_observed_in_neighbors(const SpreadingGraph& g, const ObserverSet& o, NodeId i) {
  for (const Arc& a : g.in_arcs(i))
    if (!o.contains(a.node))
      throw CoverViolation("unobserved node " + std::to_string(i) + " has unobserved in-neighbor " +
                               std::to_string(a.node),
                           i);
}

}  // namespace detail

/// Likelihoods of the observed transitions of i's previously healthy observed
/// out-neighbors, conditioned on either value of X_i(t-1).
inline Likelihoods likelihoods(const SpreadingGraph& g, const ObserverSet& o, const SISParams& prev_params,
                               const Observation& prev_obs, const Observation& cur_obs, NodeId i) {
  std::size_t touches = 0;
  return detail::likelihoods_counted(g, o, prev_params, prev_obs, cur_obs, i, touches);
}

inline double infer_observed(NodeId i, const Observation& cur_obs) { return cur_obs.value[i] ? 1.0 : 0.0; }

/// Posterior xhat_i(t|t) for an unobserved node. `prior` is xhat_i(t-1|t-1);
/// all in-neighbors of i must be observed.
inline double infer_unobserved(NodeId i, double prior, const SpreadingGraph& g, const ObserverSet& o,
                               const SISParams& prev_params, const Observation& prev_obs, const Observation& cur_obs,
                               EdgeTouches* instrumentation = nullptr) {
  std::size_t touches = 0;
  const Likelihoods l = detail::likelihoods_counted(g, o, prev_params, prev_obs, cur_obs, i, touches);

  double escape = 1.0;
  for (const Arc& a : g.in_arcs(i)) {
    ++touches;
    if (!o.contains(a.node))
      throw CoverViolation("unobserved node " + std::to_string(i) + " has unobserved in-neighbor " +
                               std::to_string(a.node),
                           i);
    if (prev_obs.value[a.node]) escape *= 1.0 - prev_params.beta[a.edge];
  }
  const double infect = 1.0 - escape;
  if (instrumentation) instrumentation->record(touches);

  const double evidence = l.infected * prior + l.healthy * (1.0 - prior);
  if (evidence < 1e-12)
    throw DegenerateEvidence("observations around node " + std::to_string(i) + " have probability " +
                                 std::to_string(evidence) + " under the model",
                             i);
  const double joint = (1.0 - prev_params.delta[i]) * l.infected * prior + infect * l.healthy * (1.0 - prior);
  return std::clamp(joint / evidence, 0.0, 1.0);
}

inline double infer_unobserved(NodeId i, const BeliefState& prev, const SpreadingGraph& g,
                               const SISParams& prev_params, const Observation& cur_obs,
                               EdgeTouches* instrumentation = nullptr) {
  return infer_unobserved(i, prev.xhat[i], g, prev.observers, prev_params, prev.observation, cur_obs,
                          instrumentation);
}

/// xhat_i(t+1|t) for an observed node under the parameters chosen at t.
inline double predict_observed(NodeId i, const BeliefState& belief, const SpreadingGraph& g,
                               const SISParams& params) {
  const auto& x = belief.observation.value;
  if (x[i]) return 1.0 - params.delta[i];
  const std::optional<NodeId> hidden = unobserved_in_neighbor(g, belief.observers, i);
  double escape = 1.0;
  for (const Arc& a : g.in_arcs(i)) {
    if (hidden && a.node == *hidden)
      escape *= 1.0 - params.beta[a.edge] * belief.xhat[a.node];
    else if (x[a.node])
      escape *= 1.0 - params.beta[a.edge];
  }
  return 1.0 - escape;
}

/// xhat_i(t+1|t) for an unobserved node; all in-neighbors must be observed.
inline double predict_unobserved(NodeId i, const BeliefState& belief, const SpreadingGraph& g,
                                 const SISParams& params) {
  detail::require_observed_in_neighbors(g, belief.observers, i);
  const double infect = 1.0 - infection_survival_prob(g, params, belief.observation.value, i);
  const double p = belief.xhat[i];
  return (1.0 - params.delta[i]) * p + infect * (1.0 - p);
}

inline std::vector<double> predict_all(const BeliefState& belief, const SpreadingGraph& g, const SISParams& params) {
  std::vector<double> out(g.node_count());
  for (NodeId i = 0; i < g.node_count(); ++i)
    out[i] = belief.observers.contains(i) ? predict_observed(i, belief, g, params)
                                          : predict_unobserved(i, belief, g, params);
  return out;
}

/// Belief at t = 0: observed entries come from the observation, unobserved
/// entries from the caller's prior.
inline BeliefState initial_belief(const ObserverSet& o, const Observation& obs0, std::span<const double> prior) {
  const std::size_t n = o.node_count();
  if (obs0.value.size() != n || prior.size() != n) throw std::invalid_argument("initial belief size mismatch");
  BeliefState b{std::vector<double>(n), o, 0, obs0, std::nullopt, std::nullopt};
  for (NodeId i = 0; i < n; ++i) {
    if (!(prior[i] >= 0.0 && prior[i] <= 1.0)) throw std::invalid_argument("prior outside [0,1]");
    b.xhat[i] = o.contains(i) ? infer_observed(i, obs0) : prior[i];
  }
  return b;
}

/// Advances the belief from t-1 to t given the parameters applied at t-1 and
/// the observation at t.
inline BeliefState filter_step(const BeliefState& prev, const SpreadingGraph& g, const SISParams& prev_params,
                               const Observation& new_obs, EdgeTouches* instrumentation = nullptr) {
  const std::size_t n = g.node_count();
  if (new_obs.value.size() != n || prev.xhat.size() != n) throw std::invalid_argument("belief size mismatch");
  BeliefState next{std::vector<double>(n), prev.observers, prev.t + 1, new_obs, prev.observation, prev_params};
  for (NodeId i = 0; i < n; ++i) {
    next.xhat[i] = prev.observers.contains(i)
                       ? infer_observed(i, new_obs)
                       : infer_unobserved(i, prev, g, prev_params, new_obs, instrumentation);
  }
  return next;
}

}  // namespace sisctl
