#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <utility>

#include "krflow/errors.hpp"

namespace krflow {

struct QuadratureControl {
  double rel_tol = 1e-13;
  double abs_tol = 1e-12;
  unsigned max_depth = 15;
};

/// Adaptive Gauss-Kronrod (7-15) on [a, b].
/// Termination is relative inside the backend; the combined check below keeps
/// tiny integrals honest: an estimate is accepted when it meets either the
/// relative target or the absolute floor.
template <class F>
double integrate(F&& f, double a, double b, const QuadratureControl& ctl = {}) {
  if (a == b) return 0.0;
  double err = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      std::forward<F>(f), a, b, ctl.max_depth, ctl.rel_tol, &err);
  if (err > ctl.abs_tol && err > ctl.rel_tol * 100.0 * std::abs(value)) {
    throw accuracy_error("quadrature failed to converge on segment");
  }
  return value;
}

}  // namespace krflow
