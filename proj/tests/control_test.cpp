#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sisctl/check.hpp"
#include "sisctl/control.hpp"

using namespace sisctl;

namespace {

// Belief on a covered random instance with random hidden probabilities.
BeliefState random_belief(const RandomInstance& inst, RngStream& rng) {
  const Observation obs = observe(inst.initial, inst.observers);
  std::vector<double> xhat(inst.graph.node_count());
  for (NodeId i = 0; i < xhat.size(); ++i) xhat[i] = inst.observers.contains(i) ? obs.value[i] : rng.uniform();
  return BeliefState{std::move(xhat), inst.observers, 0, obs, std::nullopt, std::nullopt};
}

std::vector<double> random_in(std::size_t n, Interval box, RngStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = box.lo + (box.hi - box.lo) * rng.uniform();
  return v;
}

ControlSpec affine_spec(const SpreadingGraph& g, double r, RngStream& rng) {
  ControlSpec spec = ControlSpec::reference(g, r);
  for (auto& c : spec.node_cost) c = CostTerm::affine(1.0, -(0.5 + rng.uniform()));
  for (auto& c : spec.edge_cost) c = CostTerm::affine(0.0, 0.2 + rng.uniform());
  return spec;
}

double fallback_objective(const ControlSpec& spec, const SpreadingGraph& g) {
  return objective(spec, std::vector<double>(g.node_count(), spec.delta_c_box.lo),
                   std::vector<double>(g.edge_count(), spec.gamma_box.hi));
}

}  // namespace

TEST(CostTerm, ValuesAndDerivatives) {
  const CostTerm f = CostTerm::healing_rate();
  EXPECT_DOUBLE_EQ(f.value(0.3), 0.7);
  EXPECT_DOUBLE_EQ(f.derivative(0.3), -1.0);
  const CostTerm g = CostTerm::survival_power(2.0, 3.0, 4.0);
  EXPECT_NEAR(g.value(0.5), 2.0 * std::pow(0.5, 0.75), 1e-15);
  const double h = 1e-6;
  EXPECT_NEAR(g.derivative(0.5), (g.value(0.5 + h) - g.value(0.5 - h)) / (2 * h), 1e-8);
  EXPECT_NEAR(g.second_derivative(0.5), (g.derivative(0.5 + h) - g.derivative(0.5 - h)) / (2 * h), 1e-6);
  EXPECT_THROW(CostTerm::power(1.0, -1.0), std::invalid_argument);
}

TEST(CostTerm, PiecewiseLinear) {
  const CostTerm c = CostTerm::piecewise_linear({{0.0, 1.0}, {0.5, 0.0}, {1.0, 2.0}});
  EXPECT_DOUBLE_EQ(c.value(0.25), 0.5);
  EXPECT_DOUBLE_EQ(c.value(0.75), 1.0);
  EXPECT_DOUBLE_EQ(c.minimize_on({0.0, 1.0}), 0.5);
  EXPECT_DOUBLE_EQ(c.minimize_on({0.6, 1.0}), 0.6);
  EXPECT_THROW(CostTerm::piecewise_linear({{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(CostTerm::piecewise_linear({{0.0, 0.0}}), std::invalid_argument);
}

TEST(ControlSpec, ReferenceAndValidation) {
  const SpreadingGraph g(3, {{0, 2}, {1, 2}});
  ControlSpec spec = ControlSpec::reference(g, 0.8);
  EXPECT_EQ(spec.exponent, 3.0);
  EXPECT_NO_THROW(spec.validate(g));
  spec.exponent = 2.0;
  EXPECT_THROW(spec.validate(g), std::invalid_argument);
  spec.exponent = 3.0;
  spec.decay_rate = 1.0;
  EXPECT_THROW(spec.validate(g), std::invalid_argument);
  spec.decay_rate = 0.8;
  spec.gamma_box = {0.0, 1.0};
  EXPECT_THROW(spec.validate(g), std::invalid_argument);
}

TEST(Psi, ZeroWithoutInfectionPressure) {
  const SpreadingGraph g(3, {{0, 2}, {1, 2}});
  const ObserverSet o = ObserverSet::of(3, std::vector<NodeId>{1, 2});
  const ControlSpec spec = ControlSpec::reference(g, 0.8);
  const std::vector<double> ones(2, 1.0);
  // gamma = 1 means beta = 0.
  BeliefState b{{0.7, 1.0, 0.0}, o, 0, Observation{{0, 1, 0}}, std::nullopt, std::nullopt};
  EXPECT_NEAR(psi(2, b, ones, spec, g), 0.0, 1e-15);
  // Hidden parent certainly healthy and no infected observed parents.
  b = BeliefState{{0.0, 0.0, 0.0}, o, 0, Observation{{0, 0, 0}}, std::nullopt, std::nullopt};
  EXPECT_NEAR(psi(2, b, std::vector<double>{0.3, 0.3}, spec, g), 0.0, 1e-15);
}

TEST(Psi, SingleInfectedParent) {
  const SpreadingGraph g(2, {{1, 0}});
  const ObserverSet o = ObserverSet::of(2, std::vector<NodeId>{1});
  ControlSpec spec = ControlSpec::reference(g, 0.8);
  spec.exponent = 2.0;
  const BeliefState b{{0.3, 1.0}, o, 0, Observation{{0, 1}}, std::nullopt, std::nullopt};
  EXPECT_NEAR(psi(0, b, std::vector<double>{0.5}, spec, g), 1.0 - std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(psi(0, b, std::vector<double>{0.5}, spec, g), 0.29289, 1e-5);
}

TEST(ConstraintValue, Examples) {
  const SpreadingGraph g = generate_er_graph(6, 0.4, 3);
  const ObserverSet o = ObserverSet::all(6);
  const ControlSpec spec = ControlSpec::reference(g, 0.8);
  const BeliefState healthy{std::vector<double>(6, 0.0), o, 0, Observation{std::vector<std::uint8_t>(6, 0)},
                            std::nullopt, std::nullopt};
  EXPECT_EQ(constraint_value(healthy, std::vector<double>(6, 0.5), std::vector<double>(g.edge_count(), 1.0), spec, g),
            0.0);

  const SpreadingGraph single(1, {});
  const ControlSpec s1 = ControlSpec::reference(single, 0.4);
  const BeliefState infected{{1.0}, ObserverSet::all(1), 0, Observation{{1}}, std::nullopt, std::nullopt};
  EXPECT_DOUBLE_EQ(constraint_value(infected, std::vector<double>{0.25}, std::vector<double>{}, s1, single), 0.25 - 0.4);
}

TEST(BackTransform, Examples) {
  const SpreadingGraph g(2, {{0, 1}});
  ControlSpec spec = ControlSpec::reference(g, 0.8);
  spec.exponent = 2.0;
  const SISParams a = back_transform(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0}, spec);
  EXPECT_EQ(a.delta, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(a.beta, (std::vector<double>{0.0}));
  const SISParams b = back_transform(std::vector<double>{0.3, 0.3}, std::vector<double>{0.25}, spec);
  EXPECT_DOUBLE_EQ(b.beta[0], 0.5);
  EXPECT_DOUBLE_EQ(b.delta[0], 0.7);
}

TEST(BackTransform, RoundTrip) {
  RngStream rng(31);
  const SpreadingGraph g = generate_er_graph(8, 0.4, 4);
  const ControlSpec spec = ControlSpec::reference(g, 0.8);
  for (int trial = 0; trial < 100; ++trial) {
    const SISParams p = random_params(g, rng, 0.0, 0.999);
    const auto [dc, gamma] = forward_transform(p, spec);
    const SISParams back = back_transform(dc, gamma, spec);
    for (std::size_t i = 0; i < p.delta.size(); ++i) EXPECT_NEAR(back.delta[i], p.delta[i], 1e-14);
    for (std::size_t e = 0; e < p.beta.size(); ++e) EXPECT_NEAR(back.beta[e], p.beta[e], 1e-14);
  }
}

// The transformed constraint is the predicted decay gap written in the new
// variables.
TEST(ConstraintValue, EqualsPredictedGap) {
  RngStream rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    const RandomInstance inst = random_instance(rng, 2, 10);
    const BeliefState b = random_belief(inst, rng);
    ControlSpec spec = ControlSpec::reference(inst.graph, 0.05 + 0.9 * rng.uniform());
    spec.exponent += 3.0 * rng.uniform();
    const auto dc = random_in(inst.graph.node_count(), {0.0, 1.0}, rng);
    const auto gamma = random_in(inst.graph.edge_count(), {1e-9, 1.0}, rng);
    const double c = constraint_value(b, dc, gamma, spec, inst.graph);
    const double gap = -certified_slack(b, back_transform(dc, gamma, spec), spec, inst.graph);
    EXPECT_NEAR(c, gap, 1e-10);
  }
}

TEST(ConstraintValue, ConvexAlongSegments) {
  RngStream rng(33);
  for (int trial = 0; trial < 500; ++trial) {
    const RandomInstance inst = random_instance(rng, 2, 10);
    const BeliefState b = random_belief(inst, rng);
    ControlSpec spec = ControlSpec::reference(inst.graph, 0.8);
    spec.exponent += 2.0 * rng.uniform();
    const std::size_t n = inst.graph.node_count(), m = inst.graph.edge_count();
    const auto dc0 = random_in(n, {0.0, 1.0}, rng), dc1 = random_in(n, {0.0, 1.0}, rng);
    const auto g0 = random_in(m, {1e-9, 1.0}, rng), g1 = random_in(m, {1e-9, 1.0}, rng);
    const double lambda = rng.uniform();
    std::vector<double> dc(n), gm(m);
    for (std::size_t i = 0; i < n; ++i) dc[i] = lambda * dc0[i] + (1 - lambda) * dc1[i];
    for (std::size_t e = 0; e < m; ++e) gm[e] = lambda * g0[e] + (1 - lambda) * g1[e];
    const double mid = constraint_value(b, dc, gm, spec, inst.graph);
    const double ends = lambda * constraint_value(b, dc0, g0, spec, inst.graph) +
                        (1 - lambda) * constraint_value(b, dc1, g1, spec, inst.graph);
    EXPECT_LE(mid, ends + 1e-10);
  }
}

TEST(Solve, AllHealthyGivesCheapestPoint) {
  const SpreadingGraph g = generate_er_graph(6, 0.4, 5);
  const ObserverSet o = approx_min_cover(moralize(g));
  const ControlSpec spec = ControlSpec::reference(g, 0.8);
  const BeliefState b{std::vector<double>(6, 0.0), o, 0, Observation{std::vector<std::uint8_t>(6, 0)}, std::nullopt,
                      std::nullopt};
  const ControlDecision d = solve(b, spec, g);
  for (double v : d.delta_c) EXPECT_EQ(v, 1.0);
  for (double v : d.gamma) EXPECT_EQ(v, spec.gamma_box.lo);
  EXPECT_EQ(d.constraint_value, 0.0);
  EXPECT_FALSE(d.diagnostics.constraint_active);
}

TEST(Solve, ScalarOptimum) {
  const SpreadingGraph g(1, {});
  const ControlSpec spec = ControlSpec::reference(g, 0.4);
  const BeliefState b{{1.0}, ObserverSet::all(1), 0, Observation{{1}}, std::nullopt, std::nullopt};
  const ControlDecision d = solve(b, spec, g);
  EXPECT_NEAR(d.params.delta[0], 0.6, 1e-6);
  EXPECT_LE(d.constraint_value, 1e-12);
  EXPECT_TRUE(d.diagnostics.constraint_active);
}

TEST(Solve, InfeasibleBox) {
  const SpreadingGraph g(1, {});
  ControlSpec spec = ControlSpec::reference(g, 0.4);
  spec.delta_c_box = {0.9, 1.0};
  const BeliefState b{{1.0}, ObserverSet::all(1), 0, Observation{{1}}, std::nullopt, std::nullopt};
  try {
    solve(b, spec, g);
    FAIL() << "expected Infeasible";
  } catch (const Infeasible& e) {
    EXPECT_NEAR(e.minimal_constraint_value(), 0.5, 1e-12);
  }
}

TEST(Solve, FeasibleAndNoWorseThanFallback) {
  RngStream rng(34);
  for (int trial = 0; trial < 60; ++trial) {
    const RandomInstance inst = random_instance(rng, 2, 10);
    const BeliefState b = random_belief(inst, rng);
    const ControlSpec spec = ControlSpec::reference(inst.graph, 0.3 + 0.6 * rng.uniform());
    const ControlDecision d = solve(b, spec, inst.graph);
    EXPECT_LE(d.constraint_value, 1e-6);
    EXPECT_GE(d.constraint_slack, -1e-6);
    EXPECT_LE(d.objective_value, fallback_objective(spec, inst.graph) + 1e-9);
    for (double v : d.delta_c) EXPECT_TRUE(spec.delta_c_box.contains(v));
    for (double v : d.gamma) EXPECT_TRUE(spec.gamma_box.contains(v));
    d.params.validate(inst.graph);
  }
}

TEST(Solve, Deterministic) {
  RngStream rng(35);
  const RandomInstance inst = random_instance(rng, 8, 8);
  const BeliefState b = random_belief(inst, rng);
  const ControlSpec spec = ControlSpec::reference(inst.graph, 0.7);
  const ControlDecision a = solve(b, spec, inst.graph), c = solve(b, spec, inst.graph);
  EXPECT_EQ(a.delta_c, c.delta_c);
  EXPECT_EQ(a.gamma, c.gamma);
  EXPECT_EQ(a.objective_value, c.objective_value);
}

// With affine costs the problem is convex; check the KKT conditions with a
// single multiplier for the decay constraint.
TEST(Solve, KktWithAffineCosts) {
  RngStream rng(36);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const RandomInstance inst = random_instance(rng, 3, 8);
    const auto& g = inst.graph;
    const BeliefState b = random_belief(inst, rng);
    const ControlSpec spec = affine_spec(g, 0.5, rng);
    const ControlDecision d = solve(b, spec, g);
    if (!d.diagnostics.constraint_active || d.diagnostics.fallback_chosen) continue;

    // Gradient of the constraint by central differences, and of the cost.
    std::vector<double> x(d.delta_c);
    x.insert(x.end(), d.gamma.begin(), d.gamma.end());
    const std::size_t n = g.node_count();
    auto c_at = [&](const std::vector<double>& v) {
      return constraint_value(b, std::span(v).first(n), std::span(v).subspan(n), spec, g);
    };
    std::vector<double> dc(x.size()), df(x.size());
    std::vector<Interval> box(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      box[k] = k < n ? spec.delta_c_box : spec.gamma_box;
      df[k] = k < n ? spec.node_cost[k].derivative(x[k]) : spec.edge_cost[k - n].derivative(x[k]);
      const double h = 1e-7 * std::max(1e-3, std::min(x[k] - box[k].lo, box[k].hi - x[k]));
      std::vector<double> up(x), down(x);
      up[k] += h;
      down[k] -= h;
      dc[k] = (c_at(up) - c_at(down)) / (2 * h);
    }
    // Multiplier from the interior variable with the steepest constraint slope.
    double lambda = std::numeric_limits<double>::quiet_NaN(), best = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const bool interior = x[k] - box[k].lo > 1e-4 && box[k].hi - x[k] > 1e-4;
      if (interior && std::abs(dc[k]) > best) {
        best = std::abs(dc[k]);
        lambda = -df[k] / dc[k];
      }
    }
    if (std::isnan(lambda)) continue;
    EXPECT_GE(lambda, -1e-6);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double r = df[k] + lambda * dc[k];
      const double scale = 1.0 + std::abs(df[k]);
      if (x[k] - box[k].lo > 1e-4 && box[k].hi - x[k] > 1e-4)
        EXPECT_NEAR(r, 0.0, 1e-4 * scale) << "trial " << trial << " var " << k;
      else if (x[k] - box[k].lo <= 1e-4)
        EXPECT_GE(r, -1e-4 * scale) << "trial " << trial << " var " << k;
      else
        EXPECT_LE(r, 1e-4 * scale) << "trial " << trial << " var " << k;
    }
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

// Tiny convex problem: hidden node 0 with infected observed parent 1.
// Three variables, compared against a dense grid.
TEST(Solve, BeatsGridSearchOnTinyProblem) {
  const SpreadingGraph g(2, {{1, 0}});
  const ObserverSet o = ObserverSet::of(2, std::vector<NodeId>{1});
  ControlSpec spec = ControlSpec::reference(g, 0.6);
  spec.node_cost = {CostTerm::affine(1.0, -1.0), CostTerm::affine(1.0, -2.0)};
  spec.edge_cost = {CostTerm::affine(0.0, 0.5)};
  const BeliefState b{{0.4, 1.0}, o, 0, Observation{{0, 1}}, std::nullopt, std::nullopt};
  const ControlDecision d = solve(b, spec, g);
  ASSERT_LE(d.constraint_value, 1e-9);

  const int steps = 200;
  double grid_best = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= steps; ++a)
    for (int c = 0; c <= steps; ++c)
      for (int e = 0; e <= steps; ++e) {
        const std::vector<double> dc{a / double(steps), c / double(steps)};
        const std::vector<double> gm{std::max(spec.gamma_box.lo, e / double(steps))};
        if (constraint_value(b, dc, gm, spec, g) > 0.0) continue;
        grid_best = std::min(grid_best, objective(spec, dc, gm));
      }
  EXPECT_LE(d.objective_value, grid_best + 1e-6);
  EXPECT_GT(d.objective_value, grid_best - 0.02);
}
