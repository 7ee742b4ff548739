#pragma once

#include <cmath>
#include <concepts>
#include <functional>

#include "krflow/errors.hpp"

namespace krflow {

/// A U(2)-invariant Kahler potential in radial form: F(rho) with rho = |z|^2,
/// carried together with its time label and first two rho-derivatives.
template <class P>
concept RadialProfileC = requires(const P& p, double rho) {
  { p.time() } -> std::convertible_to<double>;
  { p.value(rho) } -> std::convertible_to<double>;
  { p.d1(rho) } -> std::convertible_to<double>;
  { p.d2(rho) } -> std::convertible_to<double>;
};

/// Eigenvalues of the metric restricted to the orthogonal complement of the
/// radial complex line (phi) and to the radial complex line itself (psi):
/// phi = F_rho, psi = F_rho + rho F_rhorho.
struct MetricEigenvalues {
  double phi = 0.0;
  double psi = 0.0;
  double det() const { return phi * psi; }
};

/// Profiles may expose closed-form eigenvalues when the generic assembly
/// psi = d1 + rho*d2 would cancel (cap-type profiles near the origin).
template <class P>
concept HasStableEigenvalues = requires(const P& p, double rho) {
  { p.eigenvalues(rho) } -> std::convertible_to<MetricEigenvalues>;
};

template <RadialProfileC P>
MetricEigenvalues metric_from_profile(const P& p, double rho) {
  if (rho < 0.0) throw std::domain_error("metric_from_profile: rho < 0");
  if constexpr (HasStableEigenvalues<P>) {
    return p.eigenvalues(rho);
  } else {
    if (rho == 0.0) {
      double d = p.d1(0.0);
      return {d, d};  // limiting values for profiles regular at the origin
    }
    double d1 = p.d1(rho);
    return {d1, d1 + rho * p.d2(rho)};
  }
}

inline double log_det(const MetricEigenvalues& m) {
  if (!(m.phi > 0.0) || !(m.psi > 0.0)) {
    throw positivity_error("log_det: nonpositive metric eigenvalue");
  }
  return std::log(m.phi) + std::log(m.psi);
}

/// Laplacian of a radial function u with respect to the metric of profile F:
/// Delta u = u_rho/phi + (u_rho + rho u_rhorho)/psi.
template <RadialProfileC F, RadialProfileC U>
double radial_laplacian(const F& background, const U& u, double rho) {
  MetricEigenvalues m = metric_from_profile(background, rho);
  if (!(m.phi > 0.0) || !(m.psi > 0.0)) {
    throw positivity_error("radial_laplacian: degenerate background metric");
  }
  double ur = u.d1(rho);
  return ur / m.phi + (ur + rho * u.d2(rho)) / m.psi;
}

/// Potential rho itself: the flat model, phi = psi = 1.
struct FlatProfile {
  double t = 1.0;
  double time() const { return t; }
  double value(double rho) const { return rho; }
  double d1(double) const { return 1.0; }
  double d2(double) const { return 0.0; }
};

/// Adapter for tests and one-off constructions.
struct FunctionProfile {
  double t = 1.0;
  std::function<double(double)> f, df, ddf;
  double time() const { return t; }
  double value(double rho) const { return f(rho); }
  double d1(double rho) const { return df(rho); }
  double d2(double rho) const { return ddf(rho); }
};

}  // namespace krflow
