#pragma once

#include "krflow/radial_profile.hpp"

namespace krflow {

/// Parabolic rescale of a radial potential: G(rho) = b * F(rho / (b t)).
/// Metric eigenvalues transform as phi_G(rho) = phi_F(rho/(bt)) / t and
/// psi_G(rho) = psi_F(rho/(bt)) / t, so the rescale with (1/b, 1/t) inverts it.
template <class Base>
struct PullbackProfile {
  Base base;
  double b = 1.0;
  double t = 1.0;

  double time() const { return base.time(); }
  double scale_arg(double rho) const { return rho / (b * t); }
  double value(double rho) const { return b * base.value(scale_arg(rho)); }
  double d1(double rho) const { return base.d1(scale_arg(rho)) / t; }
  double d2(double rho) const { return base.d2(scale_arg(rho)) / (b * t * t); }

  MetricEigenvalues eigenvalues(double rho) const
    requires HasStableEigenvalues<Base>
  {
    auto e = base.eigenvalues(scale_arg(rho));
    return {e.phi / t, e.psi / t};
  }
};

template <class Base>
PullbackProfile<Base> pull_back(Base base, double b, double t) {
  return PullbackProfile<Base>{std::move(base), b, t};
}

}  // namespace krflow
