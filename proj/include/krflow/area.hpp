#pragma once

#include <cmath>

#include "krflow/errors.hpp"
#include "krflow/richardson.hpp"

namespace krflow {

struct AreaControl {
  double rho0 = 1e-4;
  double ratio = 4.0;
  int levels = 6;
  double spread_tol = 1e-6;
};

/// Area of the exceptional fiber divided by 2*pi: lim_{rho->0} rho * d(potential)/d(rho).
/// Vanishes for potentials smooth at the origin; equals the orbifold coefficient for
/// cap-type profiles. rho*F_rho has an even expansion in rho around the limit.
template <class Profile>
double exceptional_area_coefficient(const Profile& p, AreaControl ctl = {}) {
  if constexpr (requires { p.scale(); }) {
    // keep the coarsest sample inside the even-expansion radius rho ~ 1/scale
    ctl.rho0 = std::min(ctl.rho0, 0.2 / p.scale());
  }
  auto g = [&](double rho) { return rho * p.d1(rho); };
  auto r = richardson_even(g, ctl.rho0, ctl.ratio, ctl.levels);
  double scale = std::max(1.0, std::abs(r.limit));
  if (r.spread > ctl.spread_tol * scale) {
    throw accuracy_error("exceptional_area_coefficient: extrapolation spread " +
                         std::to_string(r.spread) + " exceeds tolerance");
  }
  return r.limit;
}

}  // namespace krflow
