#pragma once

// Filter-versus-oracle comparison on small random instances. Shared by the
// `oracle-check` subcommand and the test suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sisctl/filter.hpp"
#include "sisctl/graph.hpp"
#include "sisctl/oracle.hpp"
#include "sisctl/random_graph.hpp"
#include "sisctl/rng.hpp"
#include "sisctl/sis.hpp"

namespace sisctl {

struct OracleComparison {
  double max_inference_error = 0.0;
  double max_prediction_error = 0.0;
  std::size_t steps = 0;
  EdgeTouches touches;
};

/// Simulates `schedule.size()` steps from x0 and runs the factorized filter
/// and the exact joint filter side by side. `prior` is the law x0 was drawn
/// from; observed entries are overwritten by the first observation.
inline OracleComparison compare_with_oracle(const SpreadingGraph& g, const ObserverSet& o, const ProcessState& x0,
                                            std::span<const double> prior, std::span<const SISParams> schedule,
                                            RngStream& rng) {
  OracleComparison result;
  ProcessState state = x0;
  Observation obs = observe(state, o);
  JointBelief joint = condition_on_observation(JointBelief::product(prior), o, obs);
  BeliefState belief = initial_belief(o, obs, prior);
  for (const SISParams& params : schedule) {
    const JointBelief pushed = joint_pushforward(joint, g, params);
    const std::vector<double> predicted_exact = marginals(pushed);
    const std::vector<double> predicted = predict_all(belief, g, params);
    for (std::size_t i = 0; i < predicted.size(); ++i)
      result.max_prediction_error = std::max(result.max_prediction_error, std::abs(predicted[i] - predicted_exact[i]));

    state = step(g, params, state, rng);
    obs = observe(state, o);
    joint = condition_on_observation(pushed, o, obs);
    belief = filter_step(belief, g, params, obs, &result.touches);
    const std::vector<double> exact = marginals(joint);
    for (std::size_t i = 0; i < exact.size(); ++i)
      result.max_inference_error = std::max(result.max_inference_error, std::abs(belief.xhat[i] - exact[i]));
    ++result.steps;
  }
  return result;
}

/// Parameters drawn uniformly from [lo, hi] for every node and edge.
inline SISParams random_params(const SpreadingGraph& g, RngStream& rng, double lo, double hi) {
  SISParams p = SISParams::uniform(g, 0.0, 0.0);
  for (double& d : p.delta) d = lo + (hi - lo) * rng.uniform();
  for (double& b : p.beta) b = lo + (hi - lo) * rng.uniform();
  return p;
}

/// Random small instance for filter checks: graph with n in [min_nodes,
/// max_nodes] and connection probability in [0.1, 0.6], observers from the
/// approximate minimum cover of its moralization, and an initial state drawn
/// from a random prior.
struct RandomInstance {
  SpreadingGraph graph;
  ObserverSet observers;
  std::vector<double> prior;
  ProcessState initial;
};

inline RandomInstance random_instance(RngStream& rng, std::size_t min_nodes, std::size_t max_nodes) {
  const std::size_t n = min_nodes + static_cast<std::size_t>(rng.next_u64() % (max_nodes - min_nodes + 1));
  const double p = 0.1 + 0.5 * rng.uniform();
  SpreadingGraph g = generate_er_graph(n, p, rng.next_u64());
  ObserverSet o = approx_min_cover(moralize(g));
  std::vector<double> prior(n);
  ProcessState x0 = ProcessState::all_healthy(n);
  for (std::size_t i = 0; i < n; ++i) {
    prior[i] = 0.1 + 0.8 * rng.uniform();
    x0.x[i] = rng.bernoulli(prior[i]) ? 1 : 0;
  }
  return {std::move(g), std::move(o), std::move(prior), std::move(x0)};
}

}  // namespace sisctl
