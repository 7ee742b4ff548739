#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "krflow/errors.hpp"
#include "krflow/glued_model.hpp"
#include "krflow/tridiagonal.hpp"

namespace krflow {

/// Log-uniform radial grid on [rho_floor, rho_outer]. Derivatives are taken
/// in l = log rho with exact chain-rule weights:
///   d/drho = (1/rho) d/dl,   v_rho + rho v_rhorho = v_ll / rho.
struct FlowGrid {
  std::vector<double> rho;
  double h = 0.0;  // uniform spacing in log rho

  std::size_t nodes() const { return rho.size(); }
};

inline FlowGrid make_flow_grid(double rho_floor, double rho_outer, std::size_t nodes) {
  if (!(rho_floor > 0.0) || !(rho_outer > rho_floor)) {
    throw config_error("flow grid: need 0 < rho_floor < rho_outer");
  }
  if (nodes < 16) throw config_error("flow grid: need at least 16 nodes");
  FlowGrid g;
  g.h = std::log(rho_outer / rho_floor) / double(nodes - 1);
  g.rho.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    g.rho[i] = rho_floor * std::exp(double(i) * g.h);
  }
  g.rho.back() = rho_outer;
  return g;
}

/// Perturbation state: potential = phi_mod + v on the grid. The inner node
/// follows from the regularity closure v_l(rho_floor) = 0 (v_l = rho v_rho
/// vanishes with rho since v_rho stays finite at the exceptional fiber);
/// the outer node is pinned to the Dirichlet value.
struct FlowState {
  FlowGrid grid;
  double t = 0.0;
  std::vector<double> v;
  double boundary = 0.0;

  // previous accepted level, carried for the two-step scheme
  double t_prev = 0.0;
  std::vector<double> v_prev;

  double sup_v() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
};

inline FlowState make_flow_state(FlowGrid grid, double t, double boundary = 0.0) {
  if (!(t > 0.0)) throw config_error("flow state: start time must be positive");
  FlowState s;
  s.grid = std::move(grid);
  s.t = t;
  s.v.assign(s.grid.nodes(), 0.0);
  s.v.back() = boundary;
  s.boundary = boundary;
  return s;
}

struct SolverConfig {
  double newton_tol = 1e-10;
  int max_newton = 20;
  double dt_kappa = 1e-3;  // dt = kappa * t, logarithmic time grid
  int max_halvings = 24;

  void validate() const {
    if (!(newton_tol > 0.0) || !(dt_kappa > 0.0)) {
      throw config_error("solver: tolerances must be positive");
    }
    if (max_newton < 1 || max_halvings < 1) {
      throw config_error("solver: iteration limits must be positive");
    }
  }
};

/// Problem data: the glued model plus two evolution variants. In pure
/// background mode the flow runs against the exact hyperbolic solution
/// (f identically zero); a forcing term, when present, is added to the
/// right-hand side (manufactured solutions, stability probes).
struct FlowProblem {
  GluedModelSpec model;
  bool pure_background = false;
  std::function<double(double t, double rho)> forcing;

  FlowProblem(const GluedModelSpec& spec) : model(spec) {}  // NOLINT: adapter

  void validate() const {
    model.validate();
    if (pure_background && model.mode != BackgroundMode::hyperbolic) {
      throw config_error("flow: pure background mode requires the hyperbolic solution");
    }
  }
};

/// Model quantities frozen at one time level.
struct ModelSlice {
  double t = 0.0;
  std::vector<double> phi, psi, f;

  double sup_f() const {
    double m = 0.0;
    for (double x : f) m = std::max(m, std::abs(x));
    return m;
  }
};

inline ModelSlice build_model_slice(const FlowProblem& problem, const FlowGrid& grid,
                                    double t) {
  problem.validate();
  ModelSlice s;
  s.t = t;
  const std::size_t n = grid.nodes();
  s.phi.resize(n);
  s.psi.resize(n);
  s.f.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double rho = grid.rho[i];
    if (problem.pure_background) {
      auto bg = background_potential(problem.model.mode, t, rho);
      s.phi[i] = bg.d1;
      s.psi[i] = bg.d1 + rho * bg.d2;
      s.f[i] = 0.0;  // the hyperbolic background is an exact flow
      if (!(s.phi[i] > 0.0) || !(s.psi[i] > 0.0)) {
        throw positivity_error("flow: background degenerate at rho=" + std::to_string(rho));
      }
    } else {
      auto g = glued_model(problem.model, t, rho);
      s.phi[i] = g.phi;
      s.psi[i] = g.psi;
      s.f[i] = g.f;  // already zero on the outside branch
    }
    if (problem.forcing) s.f[i] -= problem.forcing(t, rho);
  }
  return s;
}

namespace detail {

// inner closure from the one-sided second-order form of v_l(rho_floor) = 0
inline double inner_closure(const std::vector<double>& v) {
  return (4.0 * v[1] - v[2]) / 3.0;
}

// Perturbed-eigenvalue ratios at interior node i:
//   x1 = v_rho / phi_mod, x2 = (v_rho + rho v_rhorho) / psi_mod.
// Positivity of the perturbed metric is exactly 1 + x1 > 0 and 1 + x2 > 0.
struct NodeRatios {
  double x1 = 0.0, x2 = 0.0;
  bool positive = false;
};

inline NodeRatios node_ratios(const FlowGrid& grid, const ModelSlice& slice,
                              const std::vector<double>& v, std::size_t i) {
  const double h = grid.h;
  const double rho = grid.rho[i];
  const double vl = (v[i + 1] - v[i - 1]) / (2.0 * h);
  const double vll = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
  NodeRatios r;
  r.x1 = vl / (rho * slice.phi[i]);
  r.x2 = vll / (rho * slice.psi[i]);
  r.positive = (1.0 + r.x1 > 0.0) && (1.0 + r.x2 > 0.0);
  return r;
}

}  // namespace detail

/// Right-hand side of the perturbation flow at every interior node:
///   log[(phi_mod + v_rho)(psi_mod + v_rho + rho v_rhorho)] - log[phi_mod psi_mod] - f
/// assembled as log1p of the eigenvalue ratios. Entries 0 and n-1 are zero
/// (closure and Dirichlet nodes are not evolved).
inline std::vector<double> potential_flow_rhs(const FlowState& state,
                                              const FlowProblem& problem) {
  auto slice = build_model_slice(problem, state.grid, state.t);
  const std::size_t n = state.grid.nodes();
  std::vector<double> out(n, 0.0);
  std::vector<double> v = state.v;
  v[0] = detail::inner_closure(v);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    auto r = detail::node_ratios(state.grid, slice, v, i);
    if (!r.positive) {
      throw positivity_error("flow rhs: perturbed metric degenerate at rho=" +
                             std::to_string(state.grid.rho[i]));
    }
    out[i] = std::log1p(r.x1) + std::log1p(r.x2) - slice.f[i];
  }
  return out;
}

/// Q(v): the log-det nonlinearity minus its linearization at the model,
///   Q = log1p(x1) + log1p(x2) - x1 - x2,
/// nonpositive for every admissible state since log1p(x) <= x.
inline std::vector<double> q_remainder(const FlowState& state, const FlowProblem& problem) {
  auto slice = build_model_slice(problem, state.grid, state.t);
  const std::size_t n = state.grid.nodes();
  std::vector<double> out(n, 0.0);
  std::vector<double> v = state.v;
  v[0] = detail::inner_closure(v);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    auto r = detail::node_ratios(state.grid, slice, v, i);
    if (!r.positive) {
      throw positivity_error("flow remainder: perturbed metric degenerate at rho=" +
                             std::to_string(state.grid.rho[i]));
    }
    out[i] = (std::log1p(r.x1) - r.x1) + (std::log1p(r.x2) - r.x2);
  }
  return out;
}

namespace detail {

// One implicit solve of  a0 y + rlin - N(t1, y) = 0  for the interior nodes,
// where rlin collects the history terms of the multistep formula and
// N(t1, y) = log1p(x1) + log1p(x2) - f on the slice at t1. Newton with the
// exact tridiagonal Jacobian; returns false on positivity failure or
// non-convergence (caller halves dt).
inline bool implicit_solve(const FlowGrid& grid, const ModelSlice& slice, double a0,
                           const std::vector<double>& rlin, const SolverConfig& cfg,
                           std::vector<double>& y) {
  const std::size_t n = grid.nodes();
  const std::size_t m = n - 2;
  const double h = grid.h;
  std::vector<double> lo(m), di(m), up(m), rhs(m);
  for (int it = 0; it < cfg.max_newton; ++it) {
    y[0] = inner_closure(y);
    double sup_dy = 0.0, sup_y = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      auto r = node_ratios(grid, slice, y, i);
      if (!r.positive) return false;
      const double rho = grid.rho[i];
      const double Nv = std::log1p(r.x1) + std::log1p(r.x2) - slice.f[i];
      // dN/dv_{i-1}, dN/dv_i, dN/dv_{i+1}
      const double c1 = 1.0 / (2.0 * h * rho * slice.phi[i] * (1.0 + r.x1));
      const double c2 = 1.0 / (h * h * rho * slice.psi[i] * (1.0 + r.x2));
      double jl = -c1 + c2;
      double jd = -2.0 * c2;
      double ju = c1 + c2;
      if (i == 1) {  // fold the closure node: v0 = (4 v1 - v2)/3
        jd += 4.0 / 3.0 * jl;
        ju -= 1.0 / 3.0 * jl;
        jl = 0.0;
      }
      const std::size_t k = i - 1;
      lo[k] = -jl;
      di[k] = a0 - jd;
      up[k] = -ju;
      rhs[k] = -(a0 * y[i] + rlin[i] - Nv);
    }
    auto dy = solve_tridiagonal(lo, di, up, std::move(rhs));
    for (std::size_t i = 1; i + 1 < n; ++i) {
      y[i] += dy[i - 1];
      sup_dy = std::max(sup_dy, std::abs(dy[i - 1]));
      sup_y = std::max(sup_y, std::abs(y[i]));
    }
    rhs.assign(m, 0.0);
    if (sup_dy <= cfg.newton_tol * std::max(1.0, sup_y)) {
      y[0] = inner_closure(y);
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!node_ratios(grid, slice, y, i).positive) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Advance one accepted time level. Two-step backward differentiation with
/// variable step (backward Euler on the first level), Newton inner solves,
/// dt halving on positivity failure or Newton stall, hard failure after
/// max_halvings. dt never exceeds the kappa*t controller or the cap argument.
inline FlowState step(const FlowState& state, const SolverConfig& cfg,
                      const FlowProblem& problem, double dt_cap = 0.0,
                      ModelSlice* accepted_slice = nullptr) {
  cfg.validate();
  problem.validate();
  if (!(state.t > 0.0) || state.grid.nodes() < 16 || state.v.size() != state.grid.nodes()) {
    throw config_error("flow step: malformed state");
  }
  double dt = cfg.dt_kappa * state.t;
  if (state.t_prev > 0.0) {
    // keep the step-ratio inside the stability range of the two-step formula
    dt = std::min(dt, 2.0 * (state.t - state.t_prev));
  }
  if (dt_cap > 0.0) dt = std::min(dt, dt_cap);

  const std::size_t n = state.grid.nodes();
  for (int half = 0; half <= cfg.max_halvings; ++half) {
    const double t1 = state.t + dt;
    auto slice = build_model_slice(problem, state.grid, t1);

    double a0;
    std::vector<double> rlin(n, 0.0);
    std::vector<double> y = state.v;
    if (state.t_prev > 0.0) {
      const double dt_prev = state.t - state.t_prev;
      const double r = dt / dt_prev;
      a0 = (1.0 + 2.0 * r) / (dt * (1.0 + r));
      const double a1 = -(1.0 + r) / dt;
      const double a2 = r * r / (dt * (1.0 + r));
      for (std::size_t i = 1; i + 1 < n; ++i) {
        rlin[i] = a1 * state.v[i] + a2 * state.v_prev[i];
        y[i] = state.v[i] + r * (state.v[i] - state.v_prev[i]);  // linear predictor
      }
    } else {
      a0 = 1.0 / dt;
      for (std::size_t i = 1; i + 1 < n; ++i) rlin[i] = -state.v[i] / dt;
    }

    if (detail::implicit_solve(state.grid, slice, a0, rlin, cfg, y)) {
      FlowState next;
      next.grid = state.grid;
      next.t = t1;
      next.v = std::move(y);
      next.v.back() = state.boundary;
      next.boundary = state.boundary;
      next.t_prev = state.t;
      next.v_prev = state.v;
      if (accepted_slice != nullptr) *accepted_slice = std::move(slice);
      return next;
    }
    dt *= 0.5;
  }
  throw accuracy_error("flow step: no admissible step at t=" + std::to_string(state.t) +
                       " after " + std::to_string(cfg.max_halvings) +
                       " halvings (last dt=" + std::to_string(dt) + ")");
}

/// Dyadic snapshots of an evolution plus the dense per-step series needed by
/// the stability bound.
struct EvolutionTrace {
  FlowGrid grid;
  std::vector<double> times;     // dyadic in t/T, plus the final time
  std::vector<double> sup_v;     // max |v| at the snapshot
  std::vector<double> sup_f;     // max |f - forcing| over the grid
  std::vector<double> bilip;     // biLipschitz constant vs the model
  std::vector<double> area;      // exceptional-fiber area coefficient
  std::vector<std::vector<double>> snapshot_v;  // full profile per snapshot

  std::vector<double> dense_t;      // every accepted level
  std::vector<double> dense_sup_f;
  std::vector<double> dense_sup_v;
};

namespace detail {

inline double bilipschitz_vs_model(const FlowGrid& grid, const ModelSlice& slice,
                                   const std::vector<double>& v) {
  double K = 1.0;
  std::vector<double> w = v;
  w[0] = inner_closure(w);
  for (std::size_t i = 1; i + 1 < grid.nodes(); ++i) {
    auto r = node_ratios(grid, slice, w, i);
    if (!r.positive) {
      throw positivity_error("biLipschitz: degenerate state at rho=" +
                             std::to_string(grid.rho[i]));
    }
    K = std::max({K, 1.0 + r.x1, 1.0 / (1.0 + r.x1), 1.0 + r.x2, 1.0 / (1.0 + r.x2)});
  }
  return K;
}

// rho F_rho at the first interior node; the area coefficient up to
// O(eta_1^2) since rho (phi_mod + v_rho) has an even expansion there
inline double grid_area_coefficient(const FlowGrid& grid, const ModelSlice& slice,
                                    const std::vector<double>& v) {
  std::vector<double> w = v;
  w[0] = inner_closure(w);
  const double vl = (w[2] - w[0]) / (2.0 * grid.h);
  return grid.rho[1] * slice.phi[1] + vl;
}

}  // namespace detail

/// Evolve a prepared state to t_end, sampling at T, 2T, 4T, ... (dyadic in
/// t/T from the starting time) and the final time. Each accepted level also
/// lands in the dense series.
inline EvolutionTrace evolve_from(FlowState state, double t_end,
                                  const FlowProblem& problem, const SolverConfig& cfg) {
  cfg.validate();
  problem.validate();
  const double T = state.t;
  if (!(T > 0.0) || !(t_end > T)) throw config_error("evolve: need 0 < T < t_end");

  EvolutionTrace trace;
  trace.grid = state.grid;

  auto record_sample = [&](const FlowState& s, const ModelSlice& slice) {
    trace.times.push_back(s.t);
    trace.sup_v.push_back(s.sup_v());
    trace.sup_f.push_back(slice.sup_f());
    trace.bilip.push_back(detail::bilipschitz_vs_model(s.grid, slice, s.v));
    trace.area.push_back(detail::grid_area_coefficient(s.grid, slice, s.v));
    trace.snapshot_v.push_back(s.v);
  };
  auto record_dense = [&](const FlowState& s, const ModelSlice& slice) {
    trace.dense_t.push_back(s.t);
    trace.dense_sup_f.push_back(slice.sup_f());
    trace.dense_sup_v.push_back(s.sup_v());
  };

  {
    auto slice0 = build_model_slice(problem, state.grid, state.t);
    record_sample(state, slice0);
    record_dense(state, slice0);
  }
  double next_dyadic = 2.0 * T;
  ModelSlice slice;
  while (state.t < t_end * (1.0 - 1e-12)) {
    double stop = std::min(next_dyadic, t_end);
    state = step(state, cfg, problem, stop - state.t, &slice);
    record_dense(state, slice);
    if (state.t >= stop * (1.0 - 1e-12)) {
      record_sample(state, slice);
      if (stop == next_dyadic) next_dyadic *= 2.0;
    }
  }
  return trace;
}

/// Evolve from v(T) = 0.
inline EvolutionTrace evolve(double T, double t_end, const FlowProblem& problem,
                             const SolverConfig& cfg, const FlowGrid& grid) {
  return evolve_from(make_flow_state(grid, T), t_end, problem, cfg);
}

/// Normalized view (Eq-level change of variables t_hat = log t, v_hat = v/t).
struct NormalizedView {
  double t_hat = 0.0;
  std::vector<double> v_hat;
};

inline NormalizedView normalized_transform(const FlowState& state) {
  if (!(state.t > 0.0)) throw config_error("normalized view: t must be positive");
  NormalizedView out;
  out.t_hat = std::log(state.t);
  out.v_hat = state.v;
  for (double& x : out.v_hat) x /= state.t;
  return out;
}

/// One backward-Euler step of the normalized equation
///   dv_hat/dt_hat = N(t, t v_hat) - v_hat
/// against one unnormalized step over the same interval; returns the sup
/// difference of the resulting perturbations. Both discretizations are
/// consistent, so the gap is O(dt_hat^2).
inline double normalized_step_consistency(const FlowState& state, const SolverConfig& cfg,
                                          const FlowProblem& problem, double dt_hat) {
  cfg.validate();
  problem.validate();
  if (!(dt_hat > 0.0)) throw config_error("normalized check: dt_hat must be positive");
  const double t1 = state.t * std::exp(dt_hat);

  FlowState plain = state;
  plain.t_prev = 0.0;  // force a single-step solve over exactly [t, t1]
  plain.v_prev.clear();
  SolverConfig one = cfg;
  one.dt_kappa = (t1 - state.t) / state.t;
  plain = step(plain, one, problem, t1 - state.t);

  // normalized backward Euler, solved in y = t1 * v_hat:
  //   (y/t1 - v_hat^n)/dt_hat + y/t1 - N(t1, y) = 0
  // which is  a0 y + rlin - N = 0  with a0 = (1 + dt_hat)/(t1 dt_hat).
  auto slice = build_model_slice(problem, state.grid, t1);
  const std::size_t n = state.grid.nodes();
  const double a0 = (1.0 + dt_hat) / (t1 * dt_hat);
  std::vector<double> rlin(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) rlin[i] = -state.v[i] / (state.t * dt_hat);
  std::vector<double> y = state.v;
  if (!detail::implicit_solve(state.grid, slice, a0, rlin, cfg, y)) {
    throw accuracy_error("normalized check: implicit solve failed");
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) sup = std::max(sup, std::abs(y[i] - plain.v[i]));
  return sup;
}

/// Forward-difference stability bound along a trace:
///   sup|v(t)| <= sup|v(T)| + integral_T^t sup|f| ds
/// checked at every snapshot with the dense trapezoid integral. The tail
/// integral_t_end^inf is estimated from a power fit on the last decade of
/// the dense series, giving the minimal start time for a target budget.
struct StabilityReport {
  std::vector<double> integral;  // trapezoid of dense sup_f up to each snapshot
  std::vector<double> margin;    // bound minus sup_v, per snapshot
  double min_margin = 0.0;
  double tail_slope = 0.0;       // fitted d log sup_f / d log t
  double tail_bound = 0.0;       // integral_t_end^inf, +inf if not integrable
  double minimal_T = 0.0;        // start time with tail below the budget
  bool pass = false;
};

inline StabilityReport stability_check(const EvolutionTrace& trace,
                                       double tail_budget = 1e-2) {
  if (trace.times.empty() || trace.dense_t.size() < 2) {
    throw config_error("stability: trace too short");
  }
  if (!(tail_budget > 0.0)) throw config_error("stability: budget must be positive");
  StabilityReport rep;

  // cumulative trapezoid of the dense sup_f series
  std::vector<double> cum(trace.dense_t.size(), 0.0);
  for (std::size_t i = 1; i < cum.size(); ++i) {
    cum[i] = cum[i - 1] + 0.5 * (trace.dense_sup_f[i] + trace.dense_sup_f[i - 1]) *
                              (trace.dense_t[i] - trace.dense_t[i - 1]);
  }
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < trace.times.size(); ++s) {
    auto it = std::lower_bound(trace.dense_t.begin(), trace.dense_t.end(),
                               trace.times[s] * (1.0 - 1e-12));
    std::size_t idx = std::size_t(it - trace.dense_t.begin());
    idx = std::min(idx, cum.size() - 1);
    double bound = trace.sup_v.front() + cum[idx];
    rep.integral.push_back(cum[idx]);
    rep.margin.push_back(bound - trace.sup_v[s]);
    rep.min_margin = std::min(rep.min_margin, rep.margin.back());
  }

  // tail fit over the last decade of positive dense samples
  double t_end = trace.dense_t.back();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < trace.dense_t.size(); ++i) {
    if (trace.dense_t[i] < 0.1 * t_end || trace.dense_sup_f[i] <= 0.0) continue;
    double lx = std::log(trace.dense_t[i]), ly = std::log(trace.dense_sup_f[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt < 4) {
    // forcing-free runs: no tail to integrate
    rep.tail_slope = 0.0;
    rep.tail_bound = 0.0;
    rep.minimal_T = trace.times.front();
  } else {
    double denom = double(cnt) * sxx - sx * sx;
    rep.tail_slope = (double(cnt) * sxy - sx * sy) / denom;
    double intercept = (sy - rep.tail_slope * sx) / double(cnt);
    double C = std::exp(intercept);
    if (rep.tail_slope < -1.0) {
      double p1 = rep.tail_slope + 1.0;
      rep.tail_bound = -C * std::pow(t_end, p1) / p1;
      rep.minimal_T = std::pow(tail_budget * (-p1) / C, 1.0 / p1);
    } else {
      rep.tail_bound = std::numeric_limits<double>::infinity();
      rep.minimal_T = std::numeric_limits<double>::infinity();
    }
  }

  double scale = std::max(1e-12, std::abs(trace.sup_v.back()) + std::abs(rep.integral.back()));
  rep.pass = rep.min_margin >= -1e-6 * scale;
  return rep;
}

}  // namespace krflow
