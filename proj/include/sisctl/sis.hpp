#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sisctl/graph.hpp"
#include "sisctl/rng.hpp"

namespace sisctl {

/// Realized compartments at time t: x[i] == 1 means node i is infected.
struct ProcessState {
  std::vector<std::uint8_t> x;
  std::size_t t = 0;

  static ProcessState all_healthy(std::size_t n) { return {std::vector<std::uint8_t>(n, 0), 0}; }
  static ProcessState all_infected(std::size_t n) { return {std::vector<std::uint8_t>(n, 1), 0}; }

  std::size_t infected_count() const { return static_cast<std::size_t>(std::count(x.begin(), x.end(), 1)); }

  friend bool operator==(const ProcessState&, const ProcessState&) = default;
};

/// Healing probabilities per node and infection probabilities per edge id.
struct SISParams {
  std::vector<double> delta;
  std::vector<double> beta;

  static SISParams uniform(const SpreadingGraph& g, double delta, double beta) {
    return {std::vector<double>(g.node_count(), delta), std::vector<double>(g.edge_count(), beta)};
  }

  void validate(const SpreadingGraph& g) const {
    if (delta.size() != g.node_count()) throw std::invalid_argument("delta must have one entry per node");
    if (beta.size() != g.edge_count()) throw std::invalid_argument("beta must have one entry per edge");
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!std::all_of(delta.begin(), delta.end(), in_unit)) throw std::invalid_argument("delta outside [0,1]");
    if (!std::all_of(beta.begin(), beta.end(), in_unit)) throw std::invalid_argument("beta outside [0,1]");
  }
};

/// Probability that no infected in-neighbor infects node i this step:
/// the product over in-neighbors j of (1 - beta_ji x_j).
inline double infection_survival_prob(const SpreadingGraph& g, const SISParams& params,
                                      std::span<const std::uint8_t> x, NodeId i) {
  double survive = 1.0;
  for (const Arc& a : g.in_arcs(i))
    if (x[a.node]) survive *= 1.0 - params.beta[a.edge];
  return survive;
}

/// Probability that node i is infected after one step from state x.
inline double next_infection_prob(const SpreadingGraph& g, const SISParams& params,
                                  std::span<const std::uint8_t> x, NodeId i) {
  return x[i] ? 1.0 - params.delta[i] : 1.0 - infection_survival_prob(g, params, x, i);
}

/// One synchronous SIS step. Consumes exactly one uniform draw u per node, in
/// node order; node i is infected next step iff u < next_infection_prob.
inline ProcessState step(const SpreadingGraph& g, const SISParams& params, const ProcessState& state,
                         RngStream& rng) {
  ProcessState next{std::vector<std::uint8_t>(state.x.size(), 0), state.t + 1};
  for (NodeId i = 0; i < g.node_count(); ++i) {
    const double u = rng.uniform();
    next.x[i] = u < next_infection_prob(g, params, state.x, i) ? 1 : 0;
  }
  return next;
}

/// States 0..horizon. `schedule` is either one constant parameter set or at
/// least `horizon` per-step sets.
inline std::vector<ProcessState> sample_trajectory(const SpreadingGraph& g, std::span<const SISParams> schedule,
                                                   const ProcessState& initial, std::size_t horizon,
                                                   RngStream& rng) {
  if (schedule.empty() || (schedule.size() != 1 && schedule.size() < horizon))
    throw std::invalid_argument("parameter schedule shorter than horizon");
  std::vector<ProcessState> out;
  out.reserve(horizon + 1);
  out.push_back(initial);
  for (std::size_t t = 0; t < horizon; ++t) {
    const SISParams& p = schedule.size() == 1 ? schedule[0] : schedule[t];
    out.push_back(step(g, p, out.back(), rng));
  }
  return out;
}

}  // namespace sisctl
