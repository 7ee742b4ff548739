#pragma once

#include <cmath>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

struct RichardsonResult {
  double limit = 0.0;
  double spread = 0.0;  // |last column - previous column| convergence gauge
};

/// Limit of g(h) as h -> 0 assuming an even error expansion g(h) = L + sum c_k h^{2k},
/// from samples h_m = h0 / ratio^m, m = 0..levels-1.
template <class G>
RichardsonResult richardson_even(G&& g, double h0, double ratio, int levels) {
  if (levels < 2) throw accuracy_error("richardson_even: need at least 2 levels");
  std::vector<double> row(levels);
  for (int m = 0; m < levels; ++m) row[m] = g(h0 / std::pow(ratio, m));
  double prev_best = row[levels - 1];
  double p = 1.0;
  for (int k = 1; k < levels; ++k) {
    p *= ratio * ratio;  // eliminated power h^{2k}
    for (int m = 0; m + k < levels; ++m) {
      row[m] = (p * row[m + 1] - row[m]) / (p - 1.0);
    }
    if (k < levels - 1) prev_best = row[levels - 1 - k];
  }
  return {row[0], std::abs(row[0] - prev_best)};
}

/// Limit of g(s) as s -> infinity assuming g(s) = L + sum c_k s^{-k},
/// from samples s_m = s0 * ratio^m, m = 0..levels-1.
template <class G>
RichardsonResult richardson_power(G&& g, double s0, double ratio, int levels) {
  if (levels < 2) throw accuracy_error("richardson_power: need at least 2 levels");
  std::vector<double> row(levels);
  for (int m = 0; m < levels; ++m) row[m] = g(s0 * std::pow(ratio, m));
  double prev_best = row[levels - 1];
  double p = 1.0;
  for (int k = 1; k < levels; ++k) {
    p *= ratio;  // eliminated power s^{-k}
    for (int m = 0; m + k < levels; ++m) {
      row[m] = (p * row[m + 1] - row[m]) / (p - 1.0);
    }
    if (k < levels - 1) prev_best = row[levels - 1 - k];
  }
  return {row[0], std::abs(row[0] - prev_best)};
}

}  // namespace krflow
