#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include "krflow/bilipschitz.hpp"
#include "krflow/correction.hpp"
#include "krflow/decay_fit.hpp"
#include "krflow/errors.hpp"
#include "krflow/flow.hpp"
#include "krflow/glued_model.hpp"
#include "krflow/run_config.hpp"
#include "krflow/weighted_norm.hpp"

namespace krflow {

/// Named gates and measured values of one experiment, in emission order.
struct ExperimentResult {
  std::string name;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, bool>> passes;

  void metric(const std::string& key, double value) { metrics.emplace_back(key, value); }
  void gate(const std::string& key, bool ok) { passes.emplace_back(key, ok); }
  bool all_pass() const {
    for (const auto& [key, ok] : passes) {
      if (!ok) return false;
    }
    return true;
  }
};

inline std::vector<double> dyadic_times(double lambda, int levels) {
  std::vector<double> ts;
  for (int d = 0; d <= levels; ++d) ts.push_back(lambda * std::pow(2.0, d));
  return ts;
}

/// Asymptotic coefficients of the first three correction terms against the
/// closed form 1/((j+1) 3^j).
inline ExperimentResult lemma1_experiment(const RunConfig& cfg) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, 3, cfg.eta_max);
  ExperimentResult res;
  res.name = "lemma1";
  for (int j = 1; j <= 3; ++j) {
    double coeff = asymptotic_coefficient(series, j);
    double target = 1.0 / (double(j + 1) * std::pow(3.0, j));
    double rel = std::abs(coeff / target - 1.0);
    res.metric("coeff_" + std::to_string(j), coeff);
    res.metric("rel_err_" + std::to_string(j), rel);
    res.gate("j" + std::to_string(j), rel <= 0.01);
  }
  return res;
}

/// Decay order of the cap residual: sup_{eta<=1} |F^(k)(s,.)| ~ s^{-(k+1)}.
inline ExperimentResult lemma2_experiment(const RunConfig& cfg) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, 2, cfg.eta_max);
  ExperimentResult res;
  res.name = "lemma2";
  for (int k = 0; k <= 2; ++k) {
    std::vector<double> ss, sup;
    for (int i = 0; i <= 12; ++i) {
      double s = 1e2 * std::pow(1e3, double(i) / 12.0);
      double m = 0.0;
      for (int q = 0; q <= 40; ++q) {
        double eta = double(q) / 40.0;
        m = std::max(m, std::abs(residual(series, k, s, eta)));
      }
      ss.push_back(s);
      sup.push_back(m);
    }
    auto fit = decay_exponent_fit(ss, sup);
    res.metric("slope_k" + std::to_string(k), fit.slope);
    res.metric("residual_k" + std::to_string(k), fit.residual);
    res.gate("k" + std::to_string(k), std::abs(fit.slope + double(k + 1)) <= 0.1);
  }
  return res;
}

/// Pointwise bounds on the cap deviation: |f| against (|z| + t^{-1/2})^{2(k+1)}
/// on |z| <= t^{-a}, and the gradient against t^{-1/2}(|z|+t^{-1/2})^{2k+1}.
/// Both normalized ratios must stay bounded over dyadic t.
inline ExperimentResult lemma3_experiment(const RunConfig& cfg) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, cfg.k, cfg.eta_max);
  ExperimentResult res;
  res.name = "lemma3";
  std::vector<double> ts = dyadic_times(cfg.lambda, cfg.levels);
  std::vector<double> sup_ratio, grad_ratio;
  for (double t : ts) {
    double rt = 1.0 / std::sqrt(t);
    double zmax = std::pow(t, -cfg.a);
    double m_f = 0.0, m_g = 0.0;
    for (int i = 0; i <= 160; ++i) {
      double z = zmax * std::pow(1e-4, 1.0 - double(i) / 160.0);
      double wf = std::pow(z + rt, 2.0 * double(cfg.k + 1));
      m_f = std::max(m_f, std::abs(f_eh(series, cfg.k, t, z * z)) / wf);
    }
    // The gradient ratio peaks on z >= t^{-1/2}.  Below that the true
    // derivative vanishes while the subtracted first-order term leaves a
    // construction floor of order u, so the sample would measure the floor.
    for (int i = 0; i <= 160; ++i) {
      double z = rt * std::pow(zmax / rt, double(i) / 160.0);
      double wg = rt * std::pow(z + rt, 2.0 * double(cfg.k) + 1.0);
      m_g = std::max(m_g, f_eh_gradient_norm(series, t, z * z) / wg);
    }
    sup_ratio.push_back(m_f);
    grad_ratio.push_back(m_g);
  }
  // The admissible window widens with t, so early levels undersample the
  // plateau; boundedness is judged on the saturated second half.
  std::size_t tail =
      std::min(std::max<std::size_t>(ts.size() - ts.size() / 2, 4), ts.size());
  auto tail_of = [&](const std::vector<double>& v) {
    return std::vector<double>(v.end() - tail, v.end());
  };
  auto fit_f = decay_exponent_fit(tail_of(ts), tail_of(sup_ratio), 1e300);
  auto fit_g = decay_exponent_fit(tail_of(ts), tail_of(grad_ratio), 1e300);
  res.metric("sup_slope", fit_f.slope);
  res.metric("sup_max", *std::max_element(sup_ratio.begin(), sup_ratio.end()));
  res.metric("grad_slope", fit_g.slope);
  res.metric("grad_max", *std::max_element(grad_ratio.begin(), grad_ratio.end()));
  res.gate("sup_bounded", fit_f.slope <= 0.05);
  res.gate("grad_bounded", fit_g.slope <= 0.05);
  return res;
}

/// Weighted-norm sweep of the model deviation over dyadic times.
struct WeightedSweepRun {
  ExperimentResult result;
  std::vector<double> t, weighted_sup, weighted_holder;
};

namespace detail {

inline WeightedSweepRun weighted_boundedness_sweep(const RunConfig& cfg,
                                                   const std::string& name, double gamma,
                                                   int k, BackgroundMode mode,
                                                   double slope_gate) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, std::max(k, 1), cfg.eta_max);
  GluedModelSpec spec{&series, k, 0.25, cfg.delta, mode};
  spec.validate();

  WeightedNormSpec ns;
  ns.gamma = gamma;
  ns.sigma_w = 2.0;
  ns.lambda = cfg.lambda;
  ns.pair_budget = std::size_t(cfg.pair_budget);

  std::vector<double> rs;
  for (int i = 0; i <= 120; ++i) {
    rs.push_back(1e-5 * std::pow(2.0 * cfg.delta / 1e-5, double(i) / 120.0));
  }
  auto field = [&](double t, double r) { return f_mod(spec, t, r * r); };
  auto psi_eval = [&](double t, double xi) { return glued_model(spec, t, xi * xi).psi; };

  WeightedSweepRun run;
  run.t = dyadic_times(cfg.lambda, cfg.levels);
  for (std::size_t d = 0; d < run.t.size(); ++d) {
    double t = run.t[d];
    run.weighted_sup.push_back(weighted_sup_norm(field, ns, {t}, rs, cfg.delta));
    run.weighted_holder.push_back(weighted_holder_norm(field, psi_eval, ns, cfg.delta, {t},
                                                       cfg.seed + d));
  }
  auto fit = decay_exponent_fit(run.t, run.weighted_sup, 1e300);
  auto fit_h = decay_exponent_fit(run.t, run.weighted_holder, 1e300);
  run.result.name = name;
  run.result.metric("slope", fit.slope);
  run.result.metric("intercept", fit.intercept);
  run.result.metric("max", *std::max_element(run.weighted_sup.begin(),
                                             run.weighted_sup.end()));
  run.result.metric("holder_slope", fit_h.slope);
  run.result.metric("holder_max", *std::max_element(run.weighted_holder.begin(),
                                                    run.weighted_holder.end()));
  run.result.gate("bounded", fit.slope <= slope_gate);
  return run;
}

}  // namespace detail

/// First glued model (k=1, a=1/4): weight t^{3/2}(|z|+t^{-1/2})^2.
inline WeightedSweepRun lemma4_experiment(const RunConfig& cfg) {
  return detail::weighted_boundedness_sweep(cfg, "lemma4", 1.5, 1,
                                            BackgroundMode::quartic, 0.05);
}

/// Refined glued model (k=4, a=1/4): weight t^{1.8}(|z|+t^{-1/2})^2.
inline WeightedSweepRun lemma6_experiment(const RunConfig& cfg) {
  return detail::weighted_boundedness_sweep(cfg, "lemma6", 1.8, 4,
                                            BackgroundMode::hyperbolic, 0.05);
}

/// One evolution against a glued model plus the decay fit of K(t) - 1 over
/// the window t >= 10 T (the initial layer from v(T) = 0 is excluded).
struct TheoremRun {
  ExperimentResult result;
  EvolutionTrace trace;
  DecayFit fit;
};

namespace detail {

inline TheoremRun theorem_decay_run(const RunConfig& cfg, const std::string& name,
                                    double exponent_gate) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, cfg.k, cfg.eta_max);
  BackgroundMode mode = (cfg.mode == "quartic") ? BackgroundMode::quartic
                                                : BackgroundMode::hyperbolic;
  GluedModelSpec spec{&series, cfg.k, cfg.a, cfg.delta, mode};
  spec.validate();
  FlowProblem prob(spec);
  auto grid = make_flow_grid(cfg.rho_floor_scale / cfg.t_end, cfg.delta * cfg.delta,
                             std::size_t(cfg.nodes));
  SolverConfig scfg;
  scfg.dt_kappa = cfg.dt_kappa;
  scfg.newton_tol = cfg.newton_tol;

  TheoremRun run;
  run.result.name = name;
  run.trace = evolve(cfg.T, cfg.t_end, prob, scfg, grid);

  // Fit window skips the first decade past the start; short runs fall back
  // to the latest four levels so the fit stays determined.
  std::vector<double> all_t, all_k;
  for (std::size_t s = 0; s < run.trace.times.size(); ++s) {
    if (!(run.trace.bilip[s] > 1.0)) continue;
    all_t.push_back(run.trace.times[s]);
    all_k.push_back(run.trace.bilip[s] - 1.0);
  }
  double cutoff = 10.0 * cfg.T;
  if (all_t.size() >= 4 && all_t[all_t.size() - 4] < cutoff)
    cutoff = all_t[all_t.size() - 4];
  std::vector<double> ts, km1;
  for (std::size_t s = 0; s < all_t.size(); ++s) {
    if (all_t[s] < cutoff) continue;
    ts.push_back(all_t[s]);
    km1.push_back(all_k[s]);
  }
  run.fit = decay_exponent_fit(ts, km1, 1e300);
  run.result.metric("exponent", run.fit.slope);
  run.result.metric("ci", run.fit.half_width);
  run.result.metric("fit_residual", run.fit.residual);
  run.result.metric("K_end", run.trace.bilip.back());
  run.result.metric("sup_v_end", run.trace.sup_v.back());
  run.result.metric("area_end", run.trace.area.back());
  run.result.gate("exponent", run.fit.slope <= exponent_gate && run.fit.residual <= 0.2);
  return run;
}

}  // namespace detail

/// First-model evolution: K(t) - 1 must decay with exponent <= -0.8.
inline TheoremRun theorem1_experiment(RunConfig cfg) {
  cfg.k = std::max(cfg.k, 1);
  return detail::theorem_decay_run(cfg, "theorem1", -0.8);
}

/// Refined-model evolution (k=4, a=1/4) under the steeper gate -1.6, plus
/// rate separation of at least 0.5 against the k=1 control. A precomputed
/// control fit can be passed in to avoid re-running it.
struct Theorem2Run {
  ExperimentResult result;
  TheoremRun main;
  DecayFit control_fit;
};

inline Theorem2Run theorem2_experiment(RunConfig cfg, const DecayFit* control = nullptr) {
  cfg.k = 4;
  cfg.a = 0.25;
  cfg.mode = "hyperbolic";

  Theorem2Run run;
  if (control == nullptr) {
    RunConfig control_cfg = cfg;
    control_cfg.k = 1;
    // the two evolutions are independent; overlap them
    auto fut = std::async(std::launch::async, [control_cfg] {
      return detail::theorem_decay_run(control_cfg, "theorem2_control", -0.8);
    });
    run.main = detail::theorem_decay_run(cfg, "theorem2", -1.6);
    run.control_fit = fut.get().fit;
  } else {
    run.main = detail::theorem_decay_run(cfg, "theorem2", -1.6);
    run.control_fit = *control;
  }

  double separation = std::abs(run.main.fit.slope) - std::abs(run.control_fit.slope);
  run.result = run.main.result;
  run.result.metric("exponent_control", run.control_fit.slope);
  run.result.metric("separation", separation);
  run.result.gate("separation", separation >= 0.5);
  return run;
}

/// Max relative eigenvalue deviation of the pulled-back metric from the
/// area-normalized static shape on eta <= eta_cap. phi_over_t and psi_over_t
/// are the pullback eigenvalues (the t-rescale of the evolved metric).
inline double eh_pullback_deviation(double b, const std::vector<double>& eta,
                                    const std::vector<double>& phi_over_t,
                                    const std::vector<double>& psi_over_t) {
  if (eta.empty() || eta.size() != phi_over_t.size() || eta.size() != psi_over_t.size()) {
    throw config_error("pullback deviation: mismatched or empty samples");
  }
  double dev = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0.0)) throw config_error("pullback deviation: eta must be positive");
    double w = std::sqrt(1.0 + b * b * eta[i] * eta[i]);
    double target_phi = w / (b * eta[i]);
    double target_psi = b * eta[i] / w;
    dev = std::max(dev, std::abs(phi_over_t[i] / target_phi - 1.0));
    dev = std::max(dev, std::abs(psi_over_t[i] / target_psi - 1.0));
  }
  return dev;
}

/// Pullback deviation of one evolution snapshot near the exceptional fiber.
inline double snapshot_pullback_deviation(const GluedModelSpec& spec, const FlowGrid& grid,
                                          double t, const std::vector<double>& v,
                                          double eta_cap = 10.0) {
  FlowProblem prob(spec);
  auto slice = build_model_slice(prob, grid, t);
  std::vector<double> w = v;
  w[0] = detail::inner_closure(w);
  std::vector<double> eta, phi_t, psi_t;
  for (std::size_t i = 1; i + 1 < grid.nodes(); ++i) {
    double e = t * grid.rho[i];
    if (e > eta_cap) break;
    auto r = detail::node_ratios(grid, slice, w, i);
    if (!r.positive) {
      throw positivity_error("pullback deviation: degenerate state at rho=" +
                             std::to_string(grid.rho[i]));
    }
    eta.push_back(e);
    phi_t.push_back(slice.phi[i] * (1.0 + r.x1) / t);
    psi_t.push_back(slice.psi[i] * (1.0 + r.x2) / t);
  }
  return eh_pullback_deviation(spec.b(), eta, phi_t, psi_t);
}

/// Convergence to the static shape along a run: the pullback deviation at
/// the sampled times must decay with a negative fitted slope.
struct Corollary1Run {
  ExperimentResult result;
  std::vector<double> t, deviation;
};

inline Corollary1Run corollary1_from_trace(const RunConfig& cfg,
                                           const GluedModelSpec& spec,
                                           const EvolutionTrace& trace) {
  cfg.validate();
  Corollary1Run run;
  run.result.name = "corollary1";
  for (std::size_t s = 0; s < trace.times.size(); ++s) {
    run.t.push_back(trace.times[s]);
    run.deviation.push_back(snapshot_pullback_deviation(spec, trace.grid, trace.times[s],
                                                        trace.snapshot_v[s]));
  }
  auto fit = decay_exponent_fit(run.t, run.deviation, 1e300);
  run.result.metric("slope", fit.slope);
  run.result.metric("deviation_first", run.deviation.front());
  run.result.metric("deviation_last", run.deviation.back());
  run.result.gate("decays", fit.slope < 0.0 && run.deviation.back() < run.deviation.front());
  return run;
}

inline Corollary1Run corollary1_experiment(RunConfig cfg) {
  cfg.k = std::max(cfg.k, 1);
  cfg.validate();
  auto series = build_correction_series(cfg.b, cfg.k, cfg.eta_max);
  BackgroundMode mode = (cfg.mode == "quartic") ? BackgroundMode::quartic
                                                : BackgroundMode::hyperbolic;
  GluedModelSpec spec{&series, cfg.k, cfg.a, cfg.delta, mode};
  spec.validate();
  FlowProblem prob(spec);
  auto grid = make_flow_grid(cfg.rho_floor_scale / cfg.t_end, cfg.delta * cfg.delta,
                             std::size_t(cfg.nodes));
  SolverConfig scfg;
  scfg.dt_kappa = cfg.dt_kappa;
  scfg.newton_tol = cfg.newton_tol;
  auto trace = evolve(cfg.T, cfg.t_end, prob, scfg, grid);
  return corollary1_from_trace(cfg, spec, trace);
}

/// Forward-difference stability bound along one run, plus the tail estimate
/// and the minimal start time for the configured budget.
struct StabilityRun {
  ExperimentResult result;
  EvolutionTrace trace;
  StabilityReport report;
};

inline StabilityRun stability_experiment(const RunConfig& cfg) {
  cfg.validate();
  auto series = build_correction_series(cfg.b, cfg.k, cfg.eta_max);
  BackgroundMode mode = (cfg.mode == "quartic") ? BackgroundMode::quartic
                                                : BackgroundMode::hyperbolic;
  GluedModelSpec spec{&series, cfg.k, cfg.a, cfg.delta, mode};
  spec.validate();
  FlowProblem prob(spec);
  auto grid = make_flow_grid(cfg.rho_floor_scale / cfg.t_end, cfg.delta * cfg.delta,
                             std::size_t(cfg.nodes));
  SolverConfig scfg;
  scfg.dt_kappa = cfg.dt_kappa;
  scfg.newton_tol = cfg.newton_tol;

  StabilityRun run;
  run.result.name = "stability";
  run.trace = evolve(cfg.T, cfg.t_end, prob, scfg, grid);
  run.report = stability_check(run.trace, cfg.tail_budget);
  run.result.metric("min_margin", run.report.min_margin);
  run.result.metric("tail_slope", run.report.tail_slope);
  run.result.metric("tail_bound", run.report.tail_bound);
  run.result.metric("minimal_T", run.report.minimal_T);
  run.result.gate("bound", run.report.pass);
  return run;
}

}  // namespace krflow
