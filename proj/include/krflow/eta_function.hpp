#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "krflow/chebyshev.hpp"
#include "krflow/errors.hpp"

namespace krflow {

/// One term of the correction hierarchy as a function of the similarity
/// variable eta: an exact polynomial part (the large-eta growth, kept in
/// monomial form so gluing-region cancellations stay exact) plus a smooth
/// remainder interpolated on the stretched coordinate xi = asinh(b eta).
///
/// The remainder's first two derivatives are stored as independent
/// interpolants rather than obtained by differentiating the value fit;
/// builders fill them from quadrature-exact representations, so d1/d2 carry
/// no spectral-differentiation noise.  d3 differentiates the d2 interpolant
/// once (mild n^2 noise, used only in slope-type measurements).
class EtaFunction {
 public:
  EtaFunction() = default;

  EtaFunction(std::vector<double> poly, double b, double eta_max, PanelizedChebyshev rem,
              PanelizedChebyshev rem_d1, PanelizedChebyshev rem_d2)
      : poly_(std::move(poly)),
        b_(b),
        eta_max_(eta_max),
        rem_(std::move(rem)),
        rem_d1_(std::move(rem_d1)),
        rem_d2_(std::move(rem_d2)) {}

  /// Remainder sampled as a callable; derivative interpolants are filled by
  /// one resp. two spectral differentiations (adequate for source terms,
  /// whose derivatives never enter tight comparisons).
  template <class F>
  static EtaFunction from_callable(std::vector<double> poly, double b, double eta_max, F&& f) {
    double xi_max = std::asinh(b * eta_max);
    auto edges = PanelizedChebyshev::panel_edges(xi_max);
    std::vector<std::vector<double>> v, v1, v2;
    for (auto [xa, xb] : edges) {
      auto xi_nodes = ChebPanel::lobatto_nodes(xa, xb, panel_points);
      std::vector<double> pv(xi_nodes.size());
      for (std::size_t i = 0; i < xi_nodes.size(); ++i) pv[i] = f(std::sinh(xi_nodes[i]) / b);
      auto panel = ChebPanel::from_values(xa, xb, pv);
      std::vector<double> p1(xi_nodes.size()), p2(xi_nodes.size());
      for (std::size_t i = 0; i < xi_nodes.size(); ++i) {
        // chain rule xi -> eta: dxi/deta = b/w, d2xi/deta2 = -b^3 eta / w^3
        double eta = std::sinh(xi_nodes[i]) / b;
        double w = std::sqrt(1.0 + b * b * eta * eta);
        double g1 = panel.d1(xi_nodes[i]);
        double g2 = panel.d2(xi_nodes[i]);
        p1[i] = g1 * (b / w);
        p2[i] = g2 * (b / w) * (b / w) + g1 * (-b * b * b * eta / (w * w * w));
      }
      v.push_back(std::move(pv));
      v1.push_back(std::move(p1));
      v2.push_back(std::move(p2));
    }
    return EtaFunction(std::move(poly), b, eta_max,
                       PanelizedChebyshev::from_values(edges, std::move(v)),
                       PanelizedChebyshev::from_values(edges, std::move(v1)),
                       PanelizedChebyshev::from_values(edges, std::move(v2)));
  }

  double b() const { return b_; }
  double eta_max() const { return eta_max_; }
  const std::vector<double>& poly() const { return poly_; }

  double xi(double eta) const { return std::asinh(b_ * eta); }

  double poly_value(double eta) const { return horner(poly_, eta, 0); }
  double poly_d1(double eta) const { return horner(poly_, eta, 1); }
  double poly_d2(double eta) const { return horner(poly_, eta, 2); }
  double poly_d3(double eta) const { return horner(poly_, eta, 3); }

  double remainder_value(double eta) const { return rem_.value(xi(eta)); }
  double remainder_d1(double eta) const { return rem_d1_.value(xi(eta)); }
  double remainder_d2(double eta) const { return rem_d2_.value(xi(eta)); }
  double remainder_d3(double eta) const {
    double w = std::sqrt(1.0 + b_ * b_ * eta * eta);
    return rem_d2_.d1(xi(eta)) * (b_ / w);
  }

  double value(double eta) const { return poly_value(eta) + remainder_value(eta); }
  double d1(double eta) const { return poly_d1(eta) + remainder_d1(eta); }
  double d2(double eta) const { return poly_d2(eta) + remainder_d2(eta); }
  double d3(double eta) const { return poly_d3(eta) + remainder_d3(eta); }

  /// eta positions of all interpolation nodes (image of the xi panel nodes).
  std::vector<double> eta_nodes() const {
    std::vector<double> out;
    for (double x : rem_.all_nodes()) out.push_back(std::sinh(x) / b_);
    return out;
  }

  static constexpr std::size_t panel_points = 48;

 private:
  static double horner(const std::vector<double>& c, double x, int order) {
    double r = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
      double fac = 1.0;
      int m = static_cast<int>(k);
      for (int d = 0; d < order; ++d) fac *= static_cast<double>(m - d);
      if (m < order) break;  // remaining coefficients differentiate to zero
      r = r * x + fac * c[k];
    }
    return r;
  }

  std::vector<double> poly_;
  double b_ = 1.0;
  double eta_max_ = 0.0;
  PanelizedChebyshev rem_, rem_d1_, rem_d2_;
};

}  // namespace krflow
