#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

/// Smallest K with K^{-1} g_A <= g_B <= K g_A on the sampled grid.
/// For radial metrics both forms are diagonal in the same frame, so K is
/// exactly the worst eigenvalue ratio; rho_star records where it occurs.
struct BiLipschitzReport {
  double t = 0.0;
  double K = 1.0;
  double rho_star = 0.0;
};

inline BiLipschitzReport bilipschitz_constant(
    const std::vector<double>& rho, const std::vector<double>& phi_a,
    const std::vector<double>& psi_a, const std::vector<double>& phi_b,
    const std::vector<double>& psi_b, double t = 0.0) {
  const std::size_t n = rho.size();
  if (n == 0 || phi_a.size() != n || psi_a.size() != n || phi_b.size() != n ||
      psi_b.size() != n) {
    throw config_error("biLipschitz: eigenvalue grids must share one size");
  }
  BiLipschitzReport rep;
  rep.t = t;
  rep.rho_star = rho[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (!(phi_a[i] > 0.0) || !(psi_a[i] > 0.0) || !(phi_b[i] > 0.0) || !(psi_b[i] > 0.0)) {
      throw positivity_error("biLipschitz: nonpositive eigenvalue at rho=" +
                             std::to_string(rho[i]));
    }
    double r1 = phi_a[i] / phi_b[i];
    double r2 = psi_a[i] / psi_b[i];
    double k = std::max({r1, 1.0 / r1, r2, 1.0 / r2});
    if (k > rep.K) {
      rep.K = k;
      rep.rho_star = rho[i];
    }
  }
  return rep;
}

}  // namespace krflow
