#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

/// Truncated Taylor series in the slow variable u = 1/s, fixed truncation
/// order shared by all operands of an expression.  Products and logs keep
/// only coefficients 0..order; that is exactly what source-term extraction
/// needs, since coefficient j of a residual series is closed under inputs
/// of order j.
class USeries {
 public:
  USeries() = default;
  explicit USeries(std::size_t order, double c0 = 0.0) : c_(order + 1, 0.0) { c_[0] = c0; }
  explicit USeries(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

  std::size_t order() const { return c_.empty() ? 0 : c_.size() - 1; }
  double operator[](std::size_t k) const { return k < c_.size() ? c_[k] : 0.0; }
  double& at(std::size_t k) { return c_[k]; }
  const std::vector<double>& coeffs() const { return c_; }

  USeries& operator+=(const USeries& o) {
    for (std::size_t k = 0; k < c_.size() && k < o.c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  USeries& operator-=(const USeries& o) {
    for (std::size_t k = 0; k < c_.size() && k < o.c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  friend USeries operator+(USeries a, const USeries& b) { return a += b; }
  friend USeries operator-(USeries a, const USeries& b) { return a -= b; }

  friend USeries operator*(const USeries& a, const USeries& b) {
    USeries r(std::max(a.order(), b.order()));
    for (std::size_t n = 0; n < r.c_.size(); ++n) {
      double s = 0.0;
      for (std::size_t k = 0; k <= n; ++k) s += a[k] * b[n - k];
      r.c_[n] = s;
    }
    return r;
  }

  friend USeries operator*(double s, USeries a) {
    for (auto& q : a.c_) q *= s;
    return a;
  }

  friend USeries operator/(const USeries& a, const USeries& b) {
    if (b[0] == 0.0) throw accuracy_error("series division by zero constant term");
    USeries r(std::max(a.order(), b.order()));
    for (std::size_t n = 0; n < r.c_.size(); ++n) {
      double s = a[n];
      for (std::size_t k = 0; k < n; ++k) s -= r.c_[k] * b[n - k];
      r.c_[n] = s / b[0];
    }
    return r;
  }

  /// log of a series with positive constant term.
  friend USeries log(const USeries& f) {
    if (f[0] <= 0.0) throw positivity_error("series log needs positive constant term");
    USeries g(f.order());
    g.c_[0] = std::log(f[0]);
    for (std::size_t n = 1; n < g.c_.size(); ++n) {
      double s = f[n];
      for (std::size_t m = 1; m < n; ++m) s -= (static_cast<double>(m) / n) * g.c_[m] * f[n - m];
      g.c_[n] = s / f[0];
    }
    return g;
  }

  /// Horner evaluation at a concrete u.
  double eval(double u) const {
    double r = 0.0;
    for (std::size_t k = c_.size(); k-- > 0;) r = r * u + c_[k];
    return r;
  }

 private:
  std::vector<double> c_;
};

}  // namespace krflow
