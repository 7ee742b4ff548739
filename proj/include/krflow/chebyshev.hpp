#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

/// One Chebyshev-Lobatto panel on [a, b] storing node values of a function
/// and of its first three derivatives.  Values between nodes come from the
/// second-kind barycentric formula, which is exact at nodes and stable under
/// the endpoint clustering we rely on near the left edge of the domain.
class ChebPanel {
 public:
  ChebPanel() = default;

  static std::vector<double> lobatto_nodes(double a, double b, std::size_t n) {
    std::vector<double> x(n + 1);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t j = 0; j <= n; ++j) {
      // descending in cos, ascending in coordinate
      double c = std::cos(std::numbers::pi * static_cast<double>(n - j) / n);
      x[j] = mid + half * c;
    }
    x.front() = a;
    x.back() = b;
    return x;
  }

  template <class F>
  static ChebPanel build(F&& f, double a, double b, std::size_t n) {
    ChebPanel p;
    p.a_ = a;
    p.b_ = b;
    p.x_ = lobatto_nodes(a, b, n);
    p.v_.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) p.v_[j] = f(p.x_[j]);
    p.finish_derivatives();
    return p;
  }

  /// Assemble from precomputed values at lobatto_nodes(a, b, v.size()-1).
  static ChebPanel from_values(double a, double b, std::vector<double> v) {
    ChebPanel p;
    p.a_ = a;
    p.b_ = b;
    p.x_ = lobatto_nodes(a, b, v.size() - 1);
    p.v_ = std::move(v);
    p.finish_derivatives();
    return p;
  }

  double lo() const { return a_; }
  double hi() const { return b_; }

  double value(double x) const { return bary(v_, x); }
  double d1(double x) const { return bary(d1_, x); }
  double d2(double x) const { return bary(d2_, x); }
  double d3(double x) const { return bary(d3_, x); }

  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& node_values() const { return v_; }

  /// Values at the nodes of the antiderivative of the interpolant, zero at
  /// the left edge.  Exact on the interpolant, so integration introduces no
  /// noise beyond the node values themselves.
  std::vector<double> antiderivative_at_nodes() const {
    const std::size_t n = x_.size() - 1;
    std::vector<double> c = coefficients();
    std::vector<double> a(n + 2, 0.0);
    if (n >= 1) a[1] = c[0] - (n >= 2 ? 0.5 * c[2] : 0.0);
    for (std::size_t m = 2; m <= n + 1; ++m) {
      double hi = (m + 1 <= n) ? c[m + 1] : 0.0;
      a[m] = (c[m - 1] - hi) / (2.0 * static_cast<double>(m));
    }
    const double half = 0.5 * (b_ - a_);
    double left = 0.0;
    for (std::size_t m = 1; m < a.size(); ++m) {
      a[m] *= half;
      left += (m % 2 == 1) ? -a[m] : a[m];
    }
    a[0] = -left;  // pins the antiderivative to zero at x = a
    std::vector<double> out(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
      double t = (x_[j] - 0.5 * (a_ + b_)) / half;
      out[j] = clenshaw(a, std::clamp(t, -1.0, 1.0));
    }
    return out;
  }

 private:
  // Chebyshev coefficients from Lobatto node values (direct DCT, O(n^2);
  // panels are small so this is cheap and has no FFT dependency).
  std::vector<double> coefficients() const {
    const std::size_t n = x_.size() - 1;
    std::vector<double> coef(n + 1, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j <= n; ++j) {
        // v_ is stored ascending in x; node j corresponds to cos angle (n-j)
        double w = (j == 0 || j == n) ? 0.5 : 1.0;
        s += w * v_[j] * std::cos(std::numbers::pi * static_cast<double>(k * (n - j)) / n);
      }
      double scale = (k == 0 || k == n) ? 1.0 / n : 2.0 / n;
      coef[k] = scale * s;
    }
    return coef;
  }

  void finish_derivatives() {
    const std::size_t n = x_.size() - 1;
    std::vector<double> coef = coefficients();
    const double dscale = 2.0 / (b_ - a_);
    auto differentiate = [&](const std::vector<double>& c) {
      std::vector<double> d(c.size(), 0.0);
      const std::size_t m = c.size() - 1;
      if (m == 0) return d;
      double next = 0.0, next2 = 0.0;  // b_{k+1}, b_{k+2}
      for (std::size_t k = m; k >= 1; --k) {
        double bk = next2 + 2.0 * static_cast<double>(k) * c[k];
        d[k - 1] = bk;
        next2 = next;
        next = bk;
        if (k == 1) break;
      }
      d[0] *= 0.5;
      for (auto& q : d) q *= dscale;
      d.back() = 0.0;
      return d;
    };
    std::vector<double> c1 = differentiate(coef);
    std::vector<double> c2 = differentiate(c1);
    std::vector<double> c3 = differentiate(c2);
    auto at_nodes = [&](const std::vector<double>& c) {
      std::vector<double> out(n + 1);
      for (std::size_t j = 0; j <= n; ++j) {
        double t = (x_[j] - 0.5 * (a_ + b_)) / (0.5 * (b_ - a_));
        out[j] = clenshaw(c, std::clamp(t, -1.0, 1.0));
      }
      return out;
    };
    d1_ = at_nodes(c1);
    d2_ = at_nodes(c2);
    d3_ = at_nodes(c3);
  }

  static double clenshaw(const std::vector<double>& c, double t) {
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
      double b0 = 2.0 * t * b1 - b2 + c[k];
      b2 = b1;
      b1 = b0;
    }
    return t * b1 - b2 + c[0];
  }

  double bary(const std::vector<double>& f, double x) const {
    const std::size_t n = x_.size() - 1;
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      double dx = x - x_[j];
      if (dx == 0.0) return f[j];
      double w = (j == 0 || j == n) ? 0.5 : 1.0;
      if ((n - j) % 2 == 1) w = -w;
      double q = w / dx;
      num += q * f[j];
      den += q;
    }
    return num / den;
  }

  double a_ = 0.0, b_ = 1.0;
  std::vector<double> x_, v_, d1_, d2_, d3_;
};

/// Piecewise-Chebyshev interpolant on [0, x_max].  Panels grow geometrically
/// from the left edge so that functions with small values near 0 keep
/// near-relative accuracy there even when they are large at the far end.
class PanelizedChebyshev {
 public:
  PanelizedChebyshev() = default;

  template <class F>
  static PanelizedChebyshev build(F&& f, double x_max, std::size_t points_per_panel = 64) {
    PanelizedChebyshev out;
    for (auto [a, b] : panel_edges(x_max)) {
      out.panels_.push_back(ChebPanel::build(f, a, b, points_per_panel));
    }
    return out;
  }

  /// Assemble from per-panel node values (values[i] at lobatto_nodes of edges[i]).
  static PanelizedChebyshev from_values(const std::vector<std::pair<double, double>>& edges,
                                        std::vector<std::vector<double>> values) {
    PanelizedChebyshev out;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      out.panels_.push_back(
          ChebPanel::from_values(edges[i].first, edges[i].second, std::move(values[i])));
    }
    return out;
  }

  static std::vector<std::pair<double, double>> panel_edges(double x_max) {
    std::vector<std::pair<double, double>> edges;
    if (x_max <= 0.6) {
      edges.emplace_back(0.0, x_max);
      return edges;
    }
    double a = 0.0, width = 0.5;
    while (true) {
      double b = a + width;
      if (b >= x_max - 0.25 * width) b = x_max;
      edges.emplace_back(a, b);
      if (b >= x_max) break;
      a = b;
      width = std::min(width * 1.8, 3.0);
    }
    return edges;
  }

  double x_max() const { return panels_.empty() ? 0.0 : panels_.back().hi(); }

  double value(double x) const { return find(x).value(x); }
  double d1(double x) const { return find(x).d1(x); }
  double d2(double x) const { return find(x).d2(x); }
  double d3(double x) const { return find(x).d3(x); }

  const std::vector<ChebPanel>& panels() const { return panels_; }

  /// All panel nodes, ascending, deduplicated at panel joins.
  std::vector<double> all_nodes() const {
    std::vector<double> out;
    for (const auto& p : panels_) {
      for (double x : p.nodes()) {
        if (out.empty() || x > out.back()) out.push_back(x);
      }
    }
    return out;
  }

 private:
  const ChebPanel& find(double x) const {
    if (panels_.empty()) throw accuracy_error("empty interpolant");
    if (x <= panels_.front().hi()) return panels_.front();
    auto it = std::lower_bound(panels_.begin(), panels_.end(), x,
                               [](const ChebPanel& p, double v) { return p.hi() < v; });
    if (it == panels_.end()) {
      if (x > panels_.back().hi() * (1.0 + 1e-12)) {
        throw std::domain_error("evaluation beyond interpolant domain");
      }
      return panels_.back();
    }
    return *it;
  }

  std::vector<ChebPanel> panels_;
};

}  // namespace krflow
