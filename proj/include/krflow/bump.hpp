#pragma once

#include <cmath>
#include <stdexcept>

namespace krflow {

struct BumpValues {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Smooth nonincreasing cutoff: 1 on [0, 1/2], 0 on [1, inf), built from
/// psi(y) = exp(-1/y).  Evaluated through the logistic form
///   sigma(x) = 1 / (1 + exp(r)),  r = 1/(1-x) - 1/(x-1/2),
/// which keeps the factor sigma(1-sigma) paired with the rational growth of
/// r', so the derivatives saturate to zero at both edges instead of
/// overflowing.  sigma(3/4) = 1/2 by symmetry.
inline BumpValues bump(double x) {
  if (!(x >= 0.0)) throw std::domain_error("bump: x must be nonnegative");
  if (x <= 0.5) return {1.0, 0.0, 0.0};
  if (x >= 1.0) return {0.0, 0.0, 0.0};
  const double p = 1.0 / (1.0 - x);
  const double q = 1.0 / (x - 0.5);
  const double r = p - q;
  if (r > 700.0) return {0.0, 0.0, 0.0};
  if (r < -700.0) return {1.0, 0.0, 0.0};
  const double s = 1.0 / (1.0 + std::exp(r));
  const double sp = s * (1.0 - s);
  const double r1 = p * p + q * q;
  const double r2 = 2.0 * (p * p * p - q * q * q);
  return {s, -sp * r1, sp * ((1.0 - 2.0 * s) * r1 * r1 - r2)};
}

struct BumpFunction {
  double value(double x) const { return bump(x).value; }
  double d1(double x) const { return bump(x).d1; }
  double d2(double x) const { return bump(x).d2; }
};

}  // namespace krflow
