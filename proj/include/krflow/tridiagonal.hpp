#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

/// Thomas elimination for a tridiagonal system. lower[0] and upper[n-1] are
/// ignored. Scratch-free for the caller: rhs is consumed and returned as the
/// solution. No pivoting; the flow Jacobians are strictly diagonally dominant.
inline std::vector<double> solve_tridiagonal(const std::vector<double>& lower,
                                             const std::vector<double>& diag,
                                             const std::vector<double>& upper,
                                             std::vector<double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n) {
    throw config_error("tridiagonal: bands and rhs must share a positive size");
  }
  std::vector<double> c(n, 0.0);
  double piv = diag[0];
  if (piv == 0.0 || !std::isfinite(piv)) throw accuracy_error("tridiagonal: zero pivot");
  c[0] = upper[0] / piv;
  rhs[0] /= piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = diag[i] - lower[i] * c[i - 1];
    if (piv == 0.0 || !std::isfinite(piv)) throw accuracy_error("tridiagonal: zero pivot");
    c[i] = upper[i] / piv;
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / piv;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
  return rhs;
}

}  // namespace krflow
