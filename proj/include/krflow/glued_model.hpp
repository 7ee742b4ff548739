#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "krflow/bump.hpp"
#include "krflow/correction.hpp"
#include "krflow/eguchi_hanson.hpp"
#include "krflow/errors.hpp"
#include "krflow/radial_profile.hpp"

namespace krflow {

enum class BackgroundMode { hyperbolic, quartic };

/// Glued model: bump-interpolation in x = t^a |z| between the corrected cap
/// (x <= 1/2) and the background flow (x >= 1).
struct GluedModelSpec {
  const CorrectionSeries* series = nullptr;
  int k = 0;             // number of correction terms carried by the cap
  double a = 0.25;       // gluing exponent, band at |z| ~ t^{-a}
  double delta = 1.0;    // chart radius, model defined for rho <= delta^2
  BackgroundMode mode = BackgroundMode::hyperbolic;

  double b() const { return series->b; }

  void validate() const {
    if (series == nullptr) throw config_error("glued model: correction series required");
    if (!(a > 0.0 && a < 0.5)) throw config_error("glued model: need 0 < a < 1/2");
    if (!(delta > 0.0)) throw config_error("glued model: chart radius must be positive");
    if (mode == BackgroundMode::hyperbolic && !(delta < std::sqrt(3.0))) {
      throw config_error("glued model: hyperbolic chart radius must stay below sqrt(3)");
    }
    if (mode == BackgroundMode::quartic && a != 0.25) {
      throw config_error("glued model: quartic background fixes a = 1/4");
    }
    if (k < 0 || k > series->order()) {
      throw config_error("glued model: order exceeds the built correction series");
    }
  }
};

struct BackgroundPieces {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double dt = 0.0;
};

inline BackgroundPieces background_potential(BackgroundMode mode, double t, double rho) {
  if (!(t > 0.0)) throw std::domain_error("background: t must be positive");
  if (mode == BackgroundMode::hyperbolic) {
    HyperbolicFlowProfile p{t};
    return {hyperbolic_flow_potential(t, rho), p.d1(rho), p.d2(rho), p.dt(rho)};
  }
  if (rho < 0.0) throw std::domain_error("background: rho must be nonnegative");
  QuarticFlowProfile p{t};
  return {p.value(rho), p.d1(rho), p.d2(rho), p.dt(rho)};
}

namespace detail {

/// Tail of the background series beyond the polynomial parts carried by the
/// first k corrections.  The correction polynomials telescope the expansion
/// -3 log(1 - rho/3) = sum_m rho^m 3^{1-m}/m through m = k+1, so in the
/// hyperbolic background the mismatch is the series tail from m = k+2; the
/// quartic background stops at m = 2, leaving minus the overshoot.
struct PolyTail {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

inline PolyTail background_poly_tail(BackgroundMode mode, int k, double rho) {
  PolyTail out;
  if (mode == BackgroundMode::quartic) {
    for (int m = 3; m <= k + 1; ++m) {
      double c = std::pow(3.0, 1.0 - m) / m;
      out.value -= c * std::pow(rho, m);
      out.d1 -= c * m * std::pow(rho, m - 1);
      out.d2 -= c * m * (m - 1) * std::pow(rho, m - 2);
    }
    if (k == 0) {
      out.value = rho * rho / 6.0;
      out.d1 = rho / 3.0;
      out.d2 = 1.0 / 3.0;
    }
    return out;
  }
  if (!(rho < 3.0)) throw std::domain_error("background tail: rho must stay below 3");
  int m = k + 2;
  double pow_term = std::pow(rho, m) * std::pow(3.0, 1.0 - m);
  for (; m < 500; ++m) {
    out.value += pow_term / m;
    out.d1 += pow_term / rho;
    out.d2 += pow_term * (m - 1) / (rho * rho);
    if (pow_term < 1e-18 * (std::abs(out.value) + 1e-300)) break;
    pow_term *= rho / 3.0;
  }
  return out;
}

}  // namespace detail

struct GluedPieces {
  double value = 0.0;
  double d1 = 0.0;   // d/drho at fixed t
  double d2 = 0.0;
  double dt = 0.0;   // d/dt at fixed rho
  double phi = 0.0;  // metric eigenvalues
  double psi = 0.0;
  double sigma = 0.0;  // bump value at t^a |z|
  double f = 0.0;      // flow deviation; exactly 0 where the bump vanishes
};

inline GluedPieces glued_model(const GluedModelSpec& spec, double t, double rho) {
  spec.validate();
  if (!(t > 0.0)) throw std::domain_error("glued model: t must be positive");
  if (!(rho > 0.0) || rho > spec.delta * spec.delta) {
    throw std::domain_error("glued model: rho must lie in (0, delta^2]");
  }
  const CorrectionSeries& cs = *spec.series;
  const double b = cs.b;
  const double x = std::pow(t, spec.a) * std::sqrt(rho);

  auto check_positive = [&](double phi, double psi) {
    if (!(phi > 0.0) || !(psi > 0.0)) {
      throw positivity_error("glued model: metric degenerate at t=" + std::to_string(t) +
                             ", rho=" + std::to_string(rho));
    }
  };

  if (x >= 1.0) {
    // pure background; its own flow deviation belongs to the background flow,
    // so f is extended by zero here
    auto bg = background_potential(spec.mode, t, rho);
    GluedPieces out;
    out.value = bg.value;
    out.d1 = bg.d1;
    out.d2 = bg.d2;
    out.dt = bg.dt;
    out.phi = bg.d1;
    out.psi = bg.d1 + rho * bg.d2;
    out.sigma = 0.0;
    out.f = 0.0;
    check_positive(out.phi, out.psi);
    return out;
  }

  auto cap = corrected_cap(cs, spec.k, t, rho);
  double f_cap = residual_parts<double>(cs, spec.k, t, t * rho).value;
  if (x <= 0.5) {
    GluedPieces out;
    out.value = cap.value;
    out.d1 = cap.d1;
    out.d2 = cap.d2;
    out.dt = cap.dt;
    out.phi = cap.phi;
    out.psi = cap.psi;
    out.sigma = 1.0;
    out.f = f_cap;
    check_positive(out.phi, out.psi);
    return out;
  }

  // Gluing band.  The discrepancy D = phi_X - phi_cap is assembled from
  // small pieces only: the background tail beyond the telescoped correction
  // polynomials, the cap profile minus its linear part
  //   P(eta) = phi_EH(b,eta)/b - eta = A/b - log1p((1+A)/(b eta))/b,
  // with A = w - b eta = 1/(w + b eta), and the correction remainders.
  // A direct difference of the full potentials would lose the band signal
  // (~t^{2a-2}) beneath roundoff of the t log t terms.
  const double eta = t * rho;
  const double u = 1.0 / t;
  const double w = std::sqrt(1.0 + b * b * eta * eta);
  const double A = 1.0 / (w + b * eta);

  auto tail = detail::background_poly_tail(spec.mode, spec.k, rho);
  const double P = A / b - std::log1p((1.0 + A) / (b * eta)) / b;
  const double P1 = A / (b * eta);
  const double P2 = -1.0 / (b * w * eta * eta);

  double rem = 0.0, rem1 = 0.0, rem2 = 0.0, remt = 0.0, upow = 1.0;
  for (int j = 1; j <= spec.k; ++j) {
    const auto& g = cs.term(j);
    double gv = g.remainder_value(eta), g1 = g.remainder_d1(eta), g2 = g.remainder_d2(eta);
    upow *= u;
    rem += upow * gv;
    rem1 += upow * g1;
    rem2 += upow * g2;
    remt += upow * (j * u * gv - rho * g1);
  }

  const double D = t * tail.value - P - rem;
  const double D1 = t * (tail.d1 - P1 - rem1);
  const double D2 = t * tail.d2 - t * t * (P2 + rem2);
  const double Dt = tail.value - rho * P1 + remt;

  auto bmp = bump(x);
  const double one_m = 1.0 - bmp.value;
  const double x_r = x / (2.0 * rho);
  const double x_rr = -x / (4.0 * rho * rho);
  const double x_t = spec.a * x / t;

  const double g1v = -bmp.d1 * x_r * D + one_m * D1;
  const double g2v = -(bmp.d2 * x_r * x_r + bmp.d1 * x_rr) * D - 2.0 * bmp.d1 * x_r * D1 +
                     one_m * D2;
  const double gtv = -bmp.d1 * x_t * D + one_m * Dt;

  GluedPieces out;
  out.value = cap.value + one_m * D;
  out.d1 = cap.d1 + g1v;
  out.d2 = cap.d2 + g2v;
  out.dt = cap.dt + gtv;
  out.phi = cap.phi + g1v;
  out.psi = cap.psi + g1v + rho * g2v;
  out.sigma = bmp.value;
  check_positive(out.phi, out.psi);
  check_positive(cap.phi, cap.psi);
  out.f = f_cap + gtv - std::log1p(g1v / cap.phi) -
          std::log1p((g1v + rho * g2v) / cap.psi);
  return out;
}

inline double phi_mod(const GluedModelSpec& spec, double t, double rho) {
  return glued_model(spec, t, rho).value;
}

/// Flow deviation of the glued model; exactly zero for t^a |z| >= 1.
inline double f_mod(const GluedModelSpec& spec, double t, double rho) {
  if (t > 0.0 && rho > 0.0 && std::pow(t, spec.a) * std::sqrt(rho) >= 1.0) return 0.0;
  return glued_model(spec, t, rho).f;
}

/// RadialProfile adapter at fixed time, with stable eigenvalues and the cap
/// scale exposed for area extrapolation.
struct GluedModelProfile {
  const GluedModelSpec* spec = nullptr;
  double t = 1.0;

  double time() const { return t; }
  double scale() const { return spec->b() * t; }
  double value(double rho) const { return glued_model(*spec, t, rho).value; }
  double d1(double rho) const { return glued_model(*spec, t, rho).d1; }
  double d2(double rho) const { return glued_model(*spec, t, rho).d2; }
  MetricEigenvalues eigenvalues(double rho) const {
    auto p = glued_model(*spec, t, rho);
    return {p.phi, p.psi};
  }
};

struct HarmonicCancellationReport {
  double inverse_residual = 0.0;  // flat Laplacian of 1/rho, exact value 0
  double quartic_residual = 0.0;  // flat Laplacian of the quartic difference
  bool pass = false;
};

/// The two leading gluing-band error sources are harmonic for the flat
/// background: 1/rho, and the background quartic term minus rho^2/6 (which
/// vanishes identically when the trace identity fixes the coefficient 1/6).
inline HarmonicCancellationReport harmonic_cancellation_check(BackgroundMode mode,
                                                              double quartic_coeff = 1.0 / 6.0) {
  FlatProfile flat;
  HarmonicCancellationReport rep;
  double dq = (mode == BackgroundMode::hyperbolic) ? 0.0 : quartic_coeff - 1.0 / 6.0;
  for (double rho : {0.3, 1.0, 2.5}) {
    FunctionProfile inv{1.0, [](double r) { return 1.0 / r; },
                        [](double r) { return -1.0 / (r * r); },
                        [](double r) { return 2.0 / (r * r * r); }};
    rep.inverse_residual =
        std::max(rep.inverse_residual, std::abs(radial_laplacian(flat, inv, rho)));
    FunctionProfile quart{1.0, [dq](double r) { return dq * r * r; },
                          [dq](double r) { return 2.0 * dq * r; },
                          [dq](double) { return 2.0 * dq; }};
    rep.quartic_residual =
        std::max(rep.quartic_residual, std::abs(radial_laplacian(flat, quart, rho)));
  }
  rep.pass = rep.inverse_residual < 1e-10 && rep.quartic_residual < 1e-10;
  return rep;
}

}  // namespace krflow
