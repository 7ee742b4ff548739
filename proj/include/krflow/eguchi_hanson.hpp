#pragma once

#include <cmath>
#include <stdexcept>

#include "krflow/radial_profile.hpp"

namespace krflow {

/// Eguchi-Hanson potential with scale c > 0, as a function of rho = |z|^2:
///   phi(rho) = sqrt(1 + c^2 rho^2) + (1/2) log[(w - 1)/(w + 1)],  w = sqrt(1 + c^2 rho^2).
/// The log argument is evaluated through the identity
/// (w - 1)/(w + 1) = c^2 rho^2/(w + 1)^2, which is cancellation-free for
/// small c*rho and stable everywhere else, so a single branch suffices.
inline double eh_potential(double c, double rho) {
  if (!(c > 0.0)) throw std::domain_error("eh_potential: c must be positive");
  if (!(rho > 0.0)) throw std::domain_error("eh_potential: rho must be positive");
  double cr = c * rho;
  double w = std::sqrt(1.0 + cr * cr);
  return w + std::log(cr) - std::log(1.0 + w);
}

/// d/drho of the potential; collapses to sqrt(1 + c^2 rho^2)/rho.
inline double eh_potential_d1(double c, double rho) {
  if (!(rho > 0.0)) throw std::domain_error("eh_potential_d1: rho must be positive");
  double cr = c * rho;
  return std::sqrt(1.0 + cr * cr) / rho;
}

/// d2 = c^2/w - w/rho^2 collapses exactly to -1/(w rho^2); the collapsed form
/// avoids the cancellation of the two-term version at large c*rho.
inline double eh_potential_d2(double c, double rho) {
  if (!(rho > 0.0)) throw std::domain_error("eh_potential_d2: rho must be positive");
  double cr = c * rho;
  double w = std::sqrt(1.0 + cr * cr);
  return -1.0 / (w * rho * rho);
}

/// Metric eigenvalues w/rho and c^2 rho/w in closed form.  Assembling psi as
/// d1 + rho*d2 would subtract two ~1/rho terms and lose ~(c rho)^-2 digits
/// near the origin; these forms are cancellation-free on the whole axis.
inline MetricEigenvalues eh_eigenvalues(double c, double rho) {
  if (!(rho > 0.0)) throw std::domain_error("eh_eigenvalues: rho must be positive");
  double cr = c * rho;
  double w = std::sqrt(1.0 + cr * cr);
  return {w / rho, c * c * rho / w};
}

/// The static Eguchi-Hanson metric: eigenvalues w/rho and c^2 rho/w; its
/// log-det is identically 2 log c (the Ricci-flat surrogate).
struct EguchiHansonProfile {
  double c = 1.0;
  double t = 1.0;
  double time() const { return t; }
  double value(double rho) const { return eh_potential(c, rho); }
  double d1(double rho) const { return eh_potential_d1(c, rho); }
  double d2(double rho) const { return eh_potential_d2(c, rho); }
  MetricEigenvalues eigenvalues(double rho) const { return eh_eigenvalues(c, rho); }
};

/// Moving cap b^{-1} phi_{EH, b t}: the zeroth-order model of the shrinking
/// exceptional divisor.  Its exceptional area coefficient is b^{-1} for all t.
struct CapProfile {
  double b = 1.0;
  double t = 1.0;
  double time() const { return t; }
  double scale() const { return b * t; }
  double value(double rho) const { return eh_potential(scale(), rho) / b; }
  double d1(double rho) const { return eh_potential_d1(scale(), rho) / b; }
  double d2(double rho) const { return eh_potential_d2(scale(), rho) / b; }
  MetricEigenvalues eigenvalues(double rho) const {
    auto e = eh_eigenvalues(scale(), rho);
    return {e.phi / b, e.psi / b};
  }
};

/// Exact solution of the potential flow F_t = log(F_rho (F_rho + rho F_rhorho))
/// modeled on the complex hyperbolic metric:
///   u(t, rho) = 2(t log t - t) - 3 t log(1 - rho/3),  rho in [0, 3).
inline double hyperbolic_flow_potential(double t, double rho) {
  if (!(t > 0.0)) throw std::domain_error("hyperbolic_flow_potential: t must be positive");
  if (rho < 0.0 || rho >= 3.0) {
    throw std::domain_error("hyperbolic_flow_potential: rho must lie in [0, 3)");
  }
  return 2.0 * (t * std::log(t) - t) - 3.0 * t * std::log(1.0 - rho / 3.0);
}

struct HyperbolicFlowProfile {
  double t = 1.0;
  double time() const { return t; }
  double value(double rho) const { return hyperbolic_flow_potential(t, rho); }
  double d1(double rho) const { return t / (1.0 - rho / 3.0); }
  double d2(double rho) const {
    double q = 1.0 - rho / 3.0;
    return t / (3.0 * q * q);
  }
  double dt(double rho) const { return 2.0 * std::log(t) - 3.0 * std::log(1.0 - rho / 3.0); }
};

/// Background truncated at quartic order: 2(t log t - t) + t(rho + q4 rho^2).
/// q4 = 1/6 is the value forced by the trace identity of the hyperbolic
/// quartic term; other values serve as negative controls.
struct QuarticFlowProfile {
  double t = 1.0;
  double q4 = 1.0 / 6.0;
  double time() const { return t; }
  double value(double rho) const {
    return 2.0 * (t * std::log(t) - t) + t * (rho + q4 * rho * rho);
  }
  double d1(double rho) const { return t * (1.0 + 2.0 * q4 * rho); }
  double d2(double) const { return 2.0 * q4 * t; }
  double dt(double rho) const { return 2.0 * std::log(t) + rho + q4 * rho * rho; }
};

/// Flow residual dt(u) - log det for profiles that know their time derivative.
template <class P>
double flow_residual(const P& p, double rho) {
  return p.dt(rho) - log_det(metric_from_profile(p, rho));
}

}  // namespace krflow
