#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "krflow/errors.hpp"
#include "krflow/quadrature.hpp"

namespace krflow {

/// Parameters of the weighted space-time Hölder norm: weight
/// t^gamma (r + t^{-1/2})^sigma_w, Hölder exponent alpha, start time lambda.
struct WeightedNormSpec {
  double alpha = 0.25;
  double gamma = 1.5;
  double sigma_w = 2.0;
  double lambda = 10.0;
  std::size_t pair_budget = 2000;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("weighted norm: alpha in (0,1)");
    if (!(gamma > 0.0) || !(sigma_w > 0.0) || !(lambda > 0.0)) {
      throw config_error("weighted norm: gamma, sigma_w, lambda must be positive");
    }
    if (pair_budget == 0) throw config_error("weighted norm: pair budget must be positive");
  }
};

/// Sup summand: max over the grid of t^gamma (r + t^{-1/2})^sigma_w |field|.
/// Radii beyond the chart radius delta are clipped to delta, matching the
/// off-chart convention for |z|.
template <class Field>
double weighted_sup_norm(Field&& field, const WeightedNormSpec& ns,
                         const std::vector<double>& ts, const std::vector<double>& rs,
                         double delta) {
  ns.validate();
  if (ts.empty() || rs.empty()) throw config_error("weighted norm: empty grid");
  double best = 0.0;
  for (double t : ts) {
    if (t < ns.lambda) continue;
    double tw = std::pow(t, ns.gamma);
    for (double r : rs) {
      double re = std::min(r, delta);
      double w = tw * std::pow(re + 1.0 / std::sqrt(t), ns.sigma_w);
      best = std::max(best, w * std::abs(field(t, re)));
    }
  }
  return best;
}

struct HolderPair {
  double t = 0.0, tp = 0.0;  // anchor and offset times
  double r = 0.0;            // annulus scale
  double z = 0.0, zp = 0.0;  // radial positions
  double dist = 0.0;         // model distance at the anchor time
  double quotient = 0.0;     // weighted Hölder quotient of this pair
};

/// Hölder summand, estimated from below by sampling quasiparabolic pairs:
/// scale r in (0, 2 delta], |z|, |z'| in [r/2, r + t^{-1/2}],
/// t <= t' <= t + (1 + sqrt(t) r)^2, distance by radial geodesic
/// integration of sqrt(psi) d|z| in the model metric at the anchor time.
/// Returns the max over samples; a Monte-Carlo lower estimate of the sup.
template <class Field, class Psi>
double weighted_holder_norm(Field&& field, Psi&& psi_eval, const WeightedNormSpec& ns,
                            double delta, const std::vector<double>& anchor_ts,
                            std::uint64_t seed, std::vector<HolderPair>* samples = nullptr) {
  ns.validate();
  if (anchor_ts.empty()) throw config_error("weighted norm: no anchor times");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  QuadratureControl dctl;
  dctl.rel_tol = 1e-7;
  dctl.abs_tol = 1e-8;
  dctl.max_depth = 12;

  double best = 0.0;
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < ns.pair_budget; ++i) {
    double t = anchor_ts[i % anchor_ts.size()];
    if (t < ns.lambda) continue;
    double rt = 1.0 / std::sqrt(t);
    double r_lo = 1e-2 * rt, r_hi = 2.0 * delta;
    double r = r_lo * std::pow(r_hi / r_lo, unit(rng));
    double z_lo = 0.5 * r, z_hi = r + rt;
    double z = z_lo + (z_hi - z_lo) * unit(rng);
    double zp = z_lo + (z_hi - z_lo) * unit(rng);
    double span = 1.0 + std::sqrt(t) * r;
    double tp = t + span * span * unit(rng);

    // Off-chart points carry |z| := delta, so the segment beyond the chart
    // edge contributes no distance; clipping also keeps psi_eval on-chart.
    double za = std::min({z, zp, delta}), zb = std::min(std::max(z, zp), delta);
    double d = (za >= zb) ? 0.0
                          : integrate([&](double xi) { return std::sqrt(psi_eval(t, xi)); },
                                      za, zb, dctl);
    double denom = d * d + (tp - t);
    if (!(denom > 0.0)) continue;
    double diff = std::abs(field(t, std::min(z, delta)) - field(tp, std::min(zp, delta)));
    double q = diff / std::pow(denom, ns.alpha);
    double w = std::pow(t, ns.gamma) * std::pow(r + rt, ns.sigma_w) *
               std::pow(span, 2.0 * ns.alpha);
    ++accepted;
    if (samples != nullptr) samples->push_back({t, tp, r, z, zp, d, w * q});
    best = std::max(best, w * q);
  }
  if (accepted == 0) throw config_error("weighted norm: sampler produced no valid pairs");
  return best;
}

}  // namespace krflow
