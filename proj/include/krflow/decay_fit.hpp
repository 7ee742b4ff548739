#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

/// Power-law fit y ~ C t^slope by least squares on (log t, log y).
/// residual is the relative misfit sqrt(1 - R^2); half_width is a ~95%
/// confidence half-width of the slope under the usual normal-error model.
struct DecayFit {
  std::vector<double> t, y;
  double slope = 0.0;
  double intercept = 0.0;  // log C
  double residual = 0.0;
  double half_width = 0.0;
};

inline DecayFit decay_exponent_fit(std::vector<double> t, std::vector<double> y,
                                   double max_residual = 0.2) {
  if (t.size() != y.size()) throw config_error("decay fit: sample size mismatch");
  if (t.size() < 4) throw config_error("decay fit: need at least 4 samples");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) throw config_error("decay fit: times must be positive");
    if (!(y[i] > 0.0)) throw config_error("decay fit: values must be positive");
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw config_error("decay fit: times must be strictly increasing");
    }
  }
  const std::size_t n = t.size();
  std::vector<double> lx(n), ly(n);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(t[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw config_error("decay fit: degenerate time samples");

  DecayFit fit;
  fit.t = std::move(t);
  fit.y = std::move(y);
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
  }
  fit.residual = (syy > 0.0) ? std::sqrt(std::max(0.0, ss_res / syy)) : 0.0;
  fit.half_width = (n > 2) ? 2.0 * std::sqrt(ss_res / double(n - 2) / sxx) : 0.0;
  if (fit.residual > max_residual) {
    throw accuracy_error("decay fit: relative residual " + std::to_string(fit.residual) +
                         " exceeds " + std::to_string(max_residual));
  }
  return fit;
}

}  // namespace krflow
