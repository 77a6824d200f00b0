#pragma once

// One-step receding-horizon controller. Decision variables are the
// transformed rates delta^c_i = 1 - delta_i and gamma_ij = (1 - beta_ij)^w.
// With w > d_max the expected-decay constraint
//
//   sum_i [ delta^c_i a_i + psi_i(gamma) (1 - a_i) ] <= r sum_i xhat_i,
//
// where a_i = xhat_i(t|t), is convex in (delta^c, gamma), and it is solved
// with a log-barrier interior-point method.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sisctl/errors.hpp"
#include "sisctl/filter.hpp"
#include "sisctl/graph.hpp"
#include "sisctl/sis.hpp"

namespace sisctl {

struct Interval {
  double lo;
  double hi;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double center() const { return 0.5 * (lo + hi); }
};

/// Cost of one transformed variable. A closed set of shapes, so the solver
/// has exact first and second derivatives.
class CostTerm {
 public:
  enum class Kind { affine, power, piecewise_linear };

  /// offset + slope * v
  static CostTerm affine(double offset, double slope) { return CostTerm(Kind::affine, offset, slope, {}); }

  /// coef * v^exponent, exponent >= 0
  static CostTerm power(double coef, double exponent) {
    if (!(exponent >= 0.0)) throw std::invalid_argument("power cost needs a nonnegative exponent");
    return CostTerm(Kind::power, coef, exponent, {});
  }

  /// Convex interpolant of (v, cost) points with increasing v; extended
  /// linearly past both ends.
  static CostTerm piecewise_linear(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw std::invalid_argument("piecewise-linear cost needs at least two points");
    for (std::size_t k = 1; k < points.size(); ++k)
      if (!(points[k].first > points[k - 1].first))
        throw std::invalid_argument("piecewise-linear breakpoints must be strictly increasing");
    double prev_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < points.size(); ++k) {
      const double s = (points[k].second - points[k - 1].second) / (points[k].first - points[k - 1].first);
      if (s < prev_slope - 1e-12) throw std::invalid_argument("piecewise-linear cost must be convex");
      prev_slope = s;
    }
    return CostTerm(Kind::piecewise_linear, 0.0, 0.0, std::move(points));
  }

  /// f(delta) = delta written over delta^c.
  static CostTerm healing_rate() { return affine(1.0, -1.0); }

  /// g(beta) = coef * (1 - beta)^k written over gamma = (1 - beta)^w.
  static CostTerm survival_power(double coef, double k, double w) { return power(coef, k / w); }

  Kind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<std::pair<double, double>>& points() const { return points_; }

  double value(double v) const {
    switch (kind_) {
      case Kind::affine: return a_ + b_ * v;
      case Kind::power: return b_ == 0.0 ? a_ : a_ * std::pow(v, b_);
      case Kind::piecewise_linear: {
        const std::size_t k = segment(v);
        return points_[k].second + slope(k) * (v - points_[k].first);
      }
    }
    return 0.0;
  }

  double derivative(double v) const {
    switch (kind_) {
      case Kind::affine: return b_;
      case Kind::power: return b_ == 0.0 ? 0.0 : a_ * b_ * std::pow(v, b_ - 1.0);
      case Kind::piecewise_linear: return slope(segment(v));
    }
    return 0.0;
  }

  double second_derivative(double v) const {
    if (kind_ != Kind::power || b_ == 0.0 || b_ == 1.0) return 0.0;
    return a_ * b_ * (b_ - 1.0) * std::pow(v, b_ - 2.0);
  }

  /// Smallest minimizer over the box.
  double minimize_on(Interval box) const {
    std::vector<double> candidates{box.lo, box.hi};
    if (kind_ == Kind::piecewise_linear)
      for (const auto& p : points_)
        if (box.contains(p.first)) candidates.push_back(p.first);
    std::sort(candidates.begin(), candidates.end());
    double best = candidates.front();
    for (double c : candidates)
      if (value(c) < value(best)) best = c;
    return best;
  }

 private:
  CostTerm(Kind kind, double a, double b, std::vector<std::pair<double, double>> points)
      : kind_(kind), a_(a), b_(b), points_(std::move(points)) {}

  std::size_t segment(double v) const {
    std::size_t k = 0;
    while (k + 2 < points_.size() && v >= points_[k + 1].first) ++k;
    return k;
  }
  double slope(std::size_t k) const {
    return (points_[k + 1].second - points_[k].second) / (points_[k + 1].first - points_[k].first);
  }

  Kind kind_;
  double a_;
  double b_;
  std::vector<std::pair<double, double>> points_;
};

/// Decay target, transform exponent, costs, and variable boxes.
struct ControlSpec {
  double decay_rate = 0.8;
  double exponent = 0.0;
  std::vector<CostTerm> node_cost;
  std::vector<CostTerm> edge_cost;
  Interval delta_c_box{0.0, 1.0};
  Interval gamma_box{1e-9, 1.0};

  /// Decay rate r, w = d_max + 1, f_i(delta) = delta and
  /// g_ij(beta) = (1 - beta)^(d_max - 1).
  static ControlSpec reference(const SpreadingGraph& g, double r) {
    ControlSpec spec;
    spec.decay_rate = r;
    spec.exponent = static_cast<double>(g.max_in_degree()) + 1.0;
    const double k = g.max_in_degree() > 0 ? static_cast<double>(g.max_in_degree()) - 1.0 : 0.0;
    spec.node_cost.assign(g.node_count(), CostTerm::healing_rate());
    spec.edge_cost.assign(g.edge_count(), CostTerm::survival_power(1.0, k, spec.exponent));
    return spec;
  }

  void validate(const SpreadingGraph& g) const {
    if (!(decay_rate > 0.0 && decay_rate < 1.0)) throw std::invalid_argument("decay rate must lie in (0,1)");
    if (!(exponent > static_cast<double>(g.max_in_degree())))
      throw std::invalid_argument("transform exponent w must exceed the maximum in-degree " +
                                  std::to_string(g.max_in_degree()));
    if (node_cost.size() != g.node_count()) throw std::invalid_argument("need one node cost per node");
    if (edge_cost.size() != g.edge_count()) throw std::invalid_argument("need one edge cost per edge");
    if (!(delta_c_box.lo >= 0.0 && delta_c_box.lo <= delta_c_box.hi && delta_c_box.hi <= 1.0))
      throw std::invalid_argument("delta^c bounds must be nested in [0,1]");
    if (!(gamma_box.lo > 0.0 && gamma_box.lo <= gamma_box.hi && gamma_box.hi <= 1.0))
      throw std::invalid_argument("gamma bounds must be nested in (0,1]");
  }
};

struct SolverDiagnostics {
  std::size_t barrier_stages = 0;
  std::size_t newton_iterations = 0;
  double duality_measure = 0.0;
  std::size_t free_variables = 0;
  bool constraint_active = false;
  bool fallback_chosen = false;
};

struct ControlDecision {
  SISParams params;
  std::vector<double> delta_c;
  std::vector<double> gamma;
  double objective_value = 0.0;
  /// Constraint value in transformed variables (<= 0 when feasible).
  double constraint_value = 0.0;
  /// r sum xhat(t|t) - sum xhat(t+1|t), recomputed through the predictors.
  double constraint_slack = 0.0;
  SolverDiagnostics diagnostics;
};

struct SolverOptions {
  double barrier_growth = 10.0;
  double duality_tolerance = 1e-8;
  double centering_tolerance = 1e-10;
  std::size_t max_newton_per_stage = 200;
};

namespace detail {

// Product over observed infected in-neighbors j of gamma_ji^(1/w), and the
// unobserved in-neighbor (for observed i) if there is one.
struct PsiParts {
  double infected_product = 1.0;
  std::optional<Arc> hidden;
};

inline PsiParts psi_parts(NodeId i, const BeliefState& belief, std::span<const double> gamma, double w,
                          const SpreadingGraph& g) {
  PsiParts parts;
  const bool observed = belief.observers.contains(i);
  for (const Arc& a : g.in_arcs(i)) {
    if (!belief.observers.contains(a.node)) {
      if (!observed)
        throw CoverViolation("unobserved node " + std::to_string(i) + " has unobserved in-neighbor " +
                                 std::to_string(a.node),
                             i);
      if (parts.hidden)
        throw CoverViolation("node " + std::to_string(i) + " has more than one unobserved in-neighbor", i);
      parts.hidden = a;
      continue;
    }
    if (belief.observation.value[a.node]) parts.infected_product *= std::pow(gamma[a.edge], 1.0 / w);
  }
  return parts;
}

}  // namespace detail

/// Convexified next-step infection probability of node i in the transformed
/// variables (the node's own compartment excluded).
inline double psi(NodeId i, const BeliefState& belief, std::span<const double> gamma, const ControlSpec& spec,
                  const SpreadingGraph& g) {
  const detail::PsiParts parts = detail::psi_parts(i, belief, gamma, spec.exponent, g);
  double mix = 1.0;
  if (parts.hidden) {
    const double p = belief.xhat[parts.hidden->node];
    mix = p * std::pow(gamma[parts.hidden->edge], 1.0 / spec.exponent) + (1.0 - p);
  }
  return 1.0 - mix * parts.infected_product;
}

/// LHS - r sum xhat; nonpositive means the decay constraint holds.
inline double constraint_value(const BeliefState& belief, std::span<const double> delta_c,
                               std::span<const double> gamma, const ControlSpec& spec, const SpreadingGraph& g) {
  double lhs = 0.0;
  for (NodeId i = 0; i < g.node_count(); ++i) {
    const double a = belief.xhat[i];
    lhs += delta_c[i] * a;
    if (a < 1.0) lhs += psi(i, belief, gamma, spec, g) * (1.0 - a);
  }
  return lhs - spec.decay_rate * belief.sum();
}

inline double objective(const ControlSpec& spec, std::span<const double> delta_c, std::span<const double> gamma) {
  double total = 0.0;
  for (std::size_t i = 0; i < delta_c.size(); ++i) total += spec.node_cost[i].value(delta_c[i]);
  for (std::size_t e = 0; e < gamma.size(); ++e) total += spec.edge_cost[e].value(gamma[e]);
  return total;
}

/// delta = 1 - delta^c, beta = 1 - gamma^(1/w).
inline SISParams back_transform(std::span<const double> delta_c, std::span<const double> gamma,
                                const ControlSpec& spec) {
  SISParams p;
  p.delta.resize(delta_c.size());
  p.beta.resize(gamma.size());
  for (std::size_t i = 0; i < delta_c.size(); ++i) p.delta[i] = std::clamp(1.0 - delta_c[i], 0.0, 1.0);
  for (std::size_t e = 0; e < gamma.size(); ++e)
    p.beta[e] = std::clamp(1.0 - std::pow(gamma[e], 1.0 / spec.exponent), 0.0, 1.0);
  return p;
}

/// Inverse of back_transform: delta^c = 1 - delta, gamma = (1 - beta)^w.
inline std::pair<std::vector<double>, std::vector<double>> forward_transform(const SISParams& params,
                                                                             const ControlSpec& spec) {
  std::vector<double> delta_c(params.delta.size()), gamma(params.beta.size());
  for (std::size_t i = 0; i < delta_c.size(); ++i) delta_c[i] = 1.0 - params.delta[i];
  for (std::size_t e = 0; e < gamma.size(); ++e) gamma[e] = std::pow(1.0 - params.beta[e], spec.exponent);
  return {std::move(delta_c), std::move(gamma)};
}

/// r sum xhat(t|t) - sum xhat(t+1|t) for the given parameters, evaluated with
/// the filter's predictors rather than the transformed constraint.
inline double certified_slack(const BeliefState& belief, const SISParams& params, const ControlSpec& spec,
                              const SpreadingGraph& g) {
  const std::vector<double> next = predict_all(belief, g, params);
  return spec.decay_rate * belief.sum() - std::accumulate(next.begin(), next.end(), 0.0);
}

namespace detail {

// The constraint restricted to the variables that are free (nontrivial box)
// and actually appear in it. Every other variable is held fixed, which is
// exact because the objective is separable.
class ReducedProblem {
 public:
  struct Variable {
    bool is_gamma;
    std::size_t index;  // node id or edge id
    Interval box;
    const CostTerm* cost;
    std::size_t block;
    std::size_t slot;
  };
  struct Monomial {
    double coef;
    std::vector<std::size_t> vars;
  };

  ReducedProblem(const BeliefState& belief, const ControlSpec& spec, const SpreadingGraph& g,
                 std::vector<double>& delta_c, std::vector<double>& gamma)
      : inv_w_(1.0 / spec.exponent) {
    const std::size_t n = g.node_count();
    std::vector<std::size_t> gamma_var(g.edge_count(), npos);
    auto add_gamma = [&](EdgeId e, NodeId target) -> std::optional<std::size_t> {
      if (spec.gamma_box.lo == spec.gamma_box.hi) return std::nullopt;
      if (gamma_var[e] == npos) {
        if (block_of_node_.size() <= target) block_of_node_.resize(n, npos);
        if (block_of_node_[target] == npos) {
          block_of_node_[target] = blocks_.size();
          blocks_.emplace_back();
        }
        const std::size_t b = block_of_node_[target];
        gamma_var[e] = vars_.size();
        vars_.push_back({true, e, spec.gamma_box, &spec.edge_cost[e], b, blocks_[b].size()});
        blocks_[b].push_back(gamma_var[e]);
      }
      return gamma_var[e];
    };

    constant_ = -spec.decay_rate * belief.sum();
    for (NodeId i = 0; i < n; ++i) {
      const double a = belief.xhat[i];
      if (a > 0.0) {
        if (spec.delta_c_box.lo == spec.delta_c_box.hi) {
          constant_ += a * delta_c[i];
        } else {
          linear_.emplace_back(vars_.size(), a);
          vars_.push_back({false, i, spec.delta_c_box, &spec.node_cost[i], blocks_.size(), 0});
          blocks_.push_back({vars_.size() - 1});
        }
      }
      if (a >= 1.0) continue;
      const double weight = 1.0 - a;
      constant_ += weight;
      const PsiParts parts = psi_parts(i, belief, gamma, spec.exponent, g);
      double fixed = 1.0;
      std::vector<std::size_t> infected_vars;
      for (const Arc& arc : g.in_arcs(i)) {
        if (!belief.observers.contains(arc.node) || !belief.observation.value[arc.node]) continue;
        if (auto v = add_gamma(arc.edge, i))
          infected_vars.push_back(*v);
        else
          fixed *= std::pow(gamma[arc.edge], inv_w_);
      }
      if (parts.hidden && belief.xhat[parts.hidden->node] > 0.0) {
        const double p = belief.xhat[parts.hidden->node];
        std::vector<std::size_t> with_hidden = infected_vars;
        double hidden_fixed = fixed;
        if (auto v = add_gamma(parts.hidden->edge, i))
          with_hidden.push_back(*v);
        else
          hidden_fixed *= std::pow(gamma[parts.hidden->edge], inv_w_);
        add_monomial(weight * p * hidden_fixed, std::move(with_hidden));
        add_monomial(weight * (1.0 - p) * fixed, std::move(infected_vars));
      } else {
        add_monomial(weight * fixed, std::move(infected_vars));
      }
    }
  }

  std::size_t size() const { return vars_.size(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<std::vector<std::size_t>>& blocks() const { return blocks_; }

  double constraint(const Eigen::VectorXd& z) const {
    double c = constant_;
    for (auto [k, a] : linear_) c += a * z[k];
    for (const Monomial& m : monomials_) c -= monomial_value(m, z);
    return c;
  }

  Eigen::VectorXd constraint_gradient(const Eigen::VectorXd& z) const {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(z.size());
    for (auto [k, a] : linear_) grad[k] += a;
    for (const Monomial& m : monomials_) {
      const double v = monomial_value(m, z);
      for (std::size_t k : m.vars) grad[k] -= inv_w_ * v / z[k];
    }
    return grad;
  }

  // Adds scale * Hessian(constraint) into the per-block matrices.
  void add_constraint_hessian(const Eigen::VectorXd& z, double scale, std::vector<Eigen::MatrixXd>& blocks) const {
    for (const Monomial& m : monomials_) {
      const double v = monomial_value(m, z);
      for (std::size_t p : m.vars) {
        const Variable& vp = vars_[p];
        for (std::size_t q : m.vars) {
          const Variable& vq = vars_[q];
          double h = -inv_w_ * inv_w_ * v / (z[p] * z[q]);
          if (p == q) h += inv_w_ * v / (z[p] * z[p]);
          blocks[vp.block](static_cast<Eigen::Index>(vp.slot), static_cast<Eigen::Index>(vq.slot)) += scale * h;
        }
      }
    }
  }

  double objective(const Eigen::VectorXd& z) const {
    double f = 0.0;
    for (std::size_t k = 0; k < vars_.size(); ++k) f += vars_[k].cost->value(z[k]);
    return f;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  void add_monomial(double coef, std::vector<std::size_t> vars) {
    if (vars.empty())
      constant_ -= coef;
    else if (coef != 0.0)
      monomials_.push_back({coef, std::move(vars)});
  }

  double monomial_value(const Monomial& m, const Eigen::VectorXd& z) const {
    double v = m.coef;
    for (std::size_t k : m.vars) v *= std::pow(z[k], inv_w_);
    return v;
  }

  double inv_w_;
  double constant_ = 0.0;
  std::vector<std::pair<std::size_t, double>> linear_;
  std::vector<Monomial> monomials_;
  std::vector<Variable> vars_;
  std::vector<std::vector<std::size_t>> blocks_;
  std::vector<std::size_t> block_of_node_;
};

struct BarrierResult {
  Eigen::VectorXd z;
  std::size_t stages = 0;
  std::size_t newton_iterations = 0;
  double duality_measure = 0.0;
};

// Minimizes the objective over {c(z) <= 0} intersected with the box, starting
// from a strictly feasible interior point. Newton systems have the form
// (block diagonal) + (rank one) and are solved with Sherman-Morrison; blocks
// that are not positive definite (concave costs) get a diagonal shift.
inline BarrierResult barrier_minimize(const ReducedProblem& prob, Eigen::VectorXd z, const SolverOptions& opt) {
  const auto& vars = prob.variables();
  const auto& blocks = prob.blocks();
  const Eigen::Index nv = static_cast<Eigen::Index>(vars.size());
  const double m = 1.0 + 2.0 * static_cast<double>(vars.size());

  auto strictly_inside = [&](const Eigen::VectorXd& y) {
    for (Eigen::Index k = 0; k < nv; ++k)
      if (!(y[k] > vars[k].box.lo && y[k] < vars[k].box.hi)) return false;
    return true;
  };
  auto phi = [&](const Eigen::VectorXd& y, double t) {
    const double c = prob.constraint(y);
    if (!(c < 0.0)) return std::numeric_limits<double>::infinity();
    double v = t * prob.objective(y) - std::log(-c);
    for (Eigen::Index k = 0; k < nv; ++k) v -= std::log(y[k] - vars[k].box.lo) + std::log(vars[k].box.hi - y[k]);
    return v;
  };

  BarrierResult result;
  std::vector<Eigen::MatrixXd> mats(blocks.size());
  double t = 1.0;
  for (;;) {
    ++result.stages;
    for (std::size_t it = 0; it < opt.max_newton_per_stage; ++it) {
      const double c = prob.constraint(z);
      const Eigen::VectorXd dc = prob.constraint_gradient(z);
      Eigen::VectorXd grad = dc / (-c);
      for (Eigen::Index k = 0; k < nv; ++k) {
        const Interval box = vars[k].box;
        grad[k] += t * vars[k].cost->derivative(z[k]) - 1.0 / (z[k] - box.lo) + 1.0 / (box.hi - z[k]);
      }
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto sz = static_cast<Eigen::Index>(blocks[b].size());
        mats[b].setZero(sz, sz);
        for (Eigen::Index s = 0; s < sz; ++s) {
          const std::size_t k = blocks[b][static_cast<std::size_t>(s)];
          const Interval box = vars[k].box;
          const double lo = z[static_cast<Eigen::Index>(k)] - box.lo;
          const double hi = box.hi - z[static_cast<Eigen::Index>(k)];
          mats[b](s, s) = t * vars[k].cost->second_derivative(z[static_cast<Eigen::Index>(k)]) + 1.0 / (lo * lo) +
                          1.0 / (hi * hi);
        }
      }
      prob.add_constraint_hessian(z, 1.0 / (-c), mats);

      // Solve (M + alpha u u^T) step = -grad with M block diagonal.
      const double alpha = 1.0 / (c * c);
      Eigen::VectorXd y(nv), v(nv);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto sz = static_cast<Eigen::Index>(blocks[b].size());
        Eigen::VectorXd rhs_g(sz), rhs_u(sz);
        for (Eigen::Index s = 0; s < sz; ++s) {
          const auto k = static_cast<Eigen::Index>(blocks[b][static_cast<std::size_t>(s)]);
          rhs_g[s] = -grad[k];
          rhs_u[s] = dc[k];
        }
        Eigen::MatrixXd mat = mats[b];
        double shift = 0.0;
        Eigen::LLT<Eigen::MatrixXd> llt(mat);
        while (llt.info() != Eigen::Success || (mat.diagonal().array() <= 0.0).any()) {
          shift = shift == 0.0 ? 1e-8 * std::max(1.0, mats[b].diagonal().cwiseAbs().maxCoeff()) : 4.0 * shift;
          mat = mats[b];
          mat.diagonal().array() += shift;
          llt.compute(mat);
        }
        const Eigen::VectorXd yb = llt.solve(rhs_g), vb = llt.solve(rhs_u);
        for (Eigen::Index s = 0; s < sz; ++s) {
          const auto k = static_cast<Eigen::Index>(blocks[b][static_cast<std::size_t>(s)]);
          y[k] = yb[s];
          v[k] = vb[s];
        }
      }
      const Eigen::VectorXd step = y - v * (alpha * dc.dot(y) / (1.0 + alpha * dc.dot(v)));
      const double decrement = -grad.dot(step);
      ++result.newton_iterations;
      if (!(decrement > 2.0 * opt.centering_tolerance)) break;

      const double phi0 = phi(z, t);
      // Below this the line search only sees rounding noise.
      if (decrement < 64.0 * std::numeric_limits<double>::epsilon() * std::abs(phi0)) break;
      double s = 1.0;
      bool moved = false;
      while (s > 1e-20) {
        const Eigen::VectorXd trial = z + s * step;
        if (strictly_inside(trial)) {
          const double phi1 = phi(trial, t);
          if (phi1 <= phi0 - 0.25 * s * decrement) {
            z = trial;
            moved = true;
            break;
          }
        }
        s *= 0.5;
      }
      if (!moved) break;
    }
    result.duality_measure = m / t;
    if (result.duality_measure < opt.duality_tolerance) break;
    t *= opt.barrier_growth;
  }
  result.z = std::move(z);
  return result;
}

}  // namespace detail

/// Chooses delta(t) and beta(t) minimizing the cost subject to the expected
/// decay constraint E[sum X(t+1) | I_t] <= r sum xhat(t|t).
///
/// Variables outside the constraint, or with a degenerate box, are set to
/// their own cost minimizer. If that point is already feasible it is returned.
/// Otherwise the barrier method runs from the box center pulled toward the
/// fallback point (delta maximal, beta minimal), and the cheaper of the
/// barrier result and the fallback is returned. With a convex objective the
/// result is optimal; otherwise it is a feasible stationary point.
inline ControlDecision solve(const BeliefState& belief, const ControlSpec& spec, const SpreadingGraph& g,
                             const SolverOptions& options = {}) {
  spec.validate(g);
  const std::size_t n = g.node_count();
  std::vector<double> delta_c(n), gamma(g.edge_count());
  for (std::size_t i = 0; i < n; ++i) delta_c[i] = spec.node_cost[i].minimize_on(spec.delta_c_box);
  for (std::size_t e = 0; e < gamma.size(); ++e) gamma[e] = spec.edge_cost[e].minimize_on(spec.gamma_box);

  ControlDecision decision;
  const detail::ReducedProblem prob(belief, spec, g, delta_c, gamma);
  const auto& vars = prob.variables();
  decision.diagnostics.free_variables = vars.size();

  auto write_back = [&](const Eigen::VectorXd& z) {
    for (std::size_t k = 0; k < vars.size(); ++k)
      (vars[k].is_gamma ? gamma[vars[k].index] : delta_c[vars[k].index]) = z[static_cast<Eigen::Index>(k)];
  };
  auto finish = [&]() {
    decision.delta_c = delta_c;
    decision.gamma = gamma;
    decision.params = back_transform(delta_c, gamma, spec);
    decision.objective_value = objective(spec, delta_c, gamma);
    decision.constraint_value = constraint_value(belief, delta_c, gamma, spec, g);
    decision.constraint_slack = certified_slack(belief, decision.params, spec, g);
    return decision;
  };

  const auto nv = static_cast<Eigen::Index>(vars.size());
  Eigen::VectorXd cheapest(nv), fallback(nv);
  for (Eigen::Index k = 0; k < nv; ++k) {
    cheapest[k] = vars[k].is_gamma ? gamma[vars[k].index] : delta_c[vars[k].index];
    fallback[k] = vars[k].is_gamma ? vars[k].box.hi : vars[k].box.lo;
  }
  if (prob.constraint(cheapest) <= 0.0) return finish();

  decision.diagnostics.constraint_active = true;
  const double c_fallback = prob.constraint(fallback);
  const double scale = std::max(1.0, spec.decay_rate * belief.sum());
  if (c_fallback > 1e-12 * scale)
    throw Infeasible("decay constraint cannot be met inside the parameter box (best value " +
                         std::to_string(c_fallback) + ")",
                     c_fallback);
  if (c_fallback >= -1e-12 * scale || nv == 0) {
    decision.diagnostics.fallback_chosen = true;
    write_back(fallback);
    return finish();
  }

  Eigen::VectorXd center(nv);
  for (Eigen::Index k = 0; k < nv; ++k) center[k] = vars[k].box.center();
  double theta = 1.0;
  Eigen::VectorXd start = center;
  while (!(prob.constraint(start) <= 0.5 * c_fallback)) {
    theta *= 0.5;
    start = fallback + theta * (center - fallback);
  }

  const detail::BarrierResult r = detail::barrier_minimize(prob, std::move(start), options);
  decision.diagnostics.barrier_stages = r.stages;
  decision.diagnostics.newton_iterations = r.newton_iterations;
  decision.diagnostics.duality_measure = r.duality_measure;
  if (prob.objective(fallback) < prob.objective(r.z)) {
    decision.diagnostics.fallback_chosen = true;
    write_back(fallback);
  } else {
    write_back(r.z);
  }
  return finish();
}

}  // namespace sisctl
