#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "krflow/eguchi_hanson.hpp"
#include "krflow/errors.hpp"
#include "krflow/eta_function.hpp"
#include "krflow/quadrature.hpp"
#include "krflow/radial_profile.hpp"
#include "krflow/richardson.hpp"
#include "krflow/useries.hpp"

namespace krflow {

/// Zeroth-order ansatz in the slow variables: 2(s log s - s) + b^{-1} phi_{EH,b}(eta).
inline double g0(double b, double s, double eta) {
  if (!(s > 0.0)) throw std::domain_error("g0: s must be positive");
  return 2.0 * (s * std::log(s) - s) + eh_potential(b, eta) / b;
}

/// L[h] = h'' + (1/eta + b^2 eta / (1 + b^2 eta^2)) h'; eta = 0 by the
/// even-extension limit 2 h''(0).
inline double linearized_operator(double b, const EtaFunction& h, double eta) {
  if (eta == 0.0) return 2.0 * h.d2(0.0);
  double w2 = 1.0 + b * b * eta * eta;
  return h.d2(eta) + (1.0 / eta + b * b * eta / w2) * h.d1(eta);
}

struct CorrectionSeries {
  double b = 1.0;
  double eta_max = 1e3;
  std::vector<EtaFunction> terms;    // terms[i] holds G^(i+1)
  std::vector<EtaFunction> sources;  // sources[i] holds H^(i+1)
  bool g0_closed_form = true;        // order zero is analytic, never tabulated

  int order() const { return static_cast<int>(terms.size()); }
  const EtaFunction& term(int j) const { return terms.at(static_cast<std::size_t>(j) - 1); }
  const EtaFunction& source(int j) const { return sources.at(static_cast<std::size_t>(j) - 1); }
};

/// Taylor coefficients in u = 1/s of the evolution residual of the partial
/// sum carrying correction terms 1..order-1, at fixed eta.  Built from the
/// cancellation-free split: residual = u w/b + sum u^{j+1}(eta G_j' - j G_j)
/// - log(1+S1) - log(1+S2), where S1, S2 collect the eigenvalue corrections.
inline USeries residual_series(const CorrectionSeries& cs, int order, double eta) {
  const double b = cs.b;
  const double w = std::sqrt(1.0 + b * b * eta * eta);
  const int nterms = std::min(order - 1, cs.order());
  const auto m = static_cast<std::size_t>(order);
  USeries s1(m), s2(m), lin(m), one(m, 1.0);
  lin.at(1) = w / b;
  for (int j = 1; j <= nterms; ++j) {
    const auto& g = cs.term(j);
    double gv = g.value(eta), g1 = g.d1(eta), g2 = g.d2(eta);
    auto ju = static_cast<std::size_t>(j);
    if (eta > 0.0) {
      s1.at(ju) = (b * eta / w) * g1;
      s2.at(ju) = (w / (b * eta)) * (g1 + eta * g2);
    } else {
      s2.at(ju) = 2.0 * g2 / b;
    }
    if (ju + 1 <= m) lin.at(ju + 1) = eta * g1 - j * gv;
  }
  return lin - log(one + s1) - log(one + s2);
}

template <class T>
struct ResidualParts {
  T value = T(0);
  T ds = T(0);
  T deta = T(0);
};

/// Residual of the partial sum with terms 1..kuse at (s, eta), with its s-
/// and eta-derivatives.  Evaluated through log1p so the value keeps absolute
/// accuracy ~eps * s^{-1} even when the result is s^{-(k+1)}-small.
template <class T = double>
ResidualParts<T> residual_parts(const CorrectionSeries& cs, int kuse, T s, double eta) {
  if (!(s > T(0))) throw std::domain_error("residual_parts: s must be positive");
  if (eta < 0.0) throw std::domain_error("residual_parts: eta must be nonnegative");
  const double b = cs.b;
  const double w = std::sqrt(1.0 + b * b * eta * eta);
  const T u = T(1) / s;
  kuse = std::min(kuse, cs.order());

  T s1 = T(0), s2 = T(0), su1 = T(0), su2 = T(0);  // S1, S2 and their u-derivatives
  T se1 = T(0), se2 = T(0);                        // eta-derivatives of S1, S2
  T p = T(0), pu = T(0), pe = T(0);                // sum u^{j+1}(eta G' - j G) and derivatives
  T upow = T(1);                                   // u^j
  for (int j = 1; j <= kuse; ++j) {
    const auto& g = cs.term(j);
    double gv = g.value(eta), g1 = g.d1(eta), g2 = g.d2(eta), g3 = g.d3(eta);
    upow *= u;
    T a, bb, ae, be;
    if (eta > 0.0) {
      a = T((b * eta / w) * g1);
      bb = T((w / (b * eta)) * (g1 + eta * g2));
      ae = T(b * g1 / (w * w * w) + (b * eta / w) * g2);
      be = T(-(g1 + eta * g2) / (b * eta * eta * w) + (w / (b * eta)) * (2.0 * g2 + eta * g3));
    } else {
      a = T(0);
      bb = T(2.0 * g2 / b);
      ae = T(0);
      be = T(0);  // S2 is even in eta
    }
    s1 += upow * a;
    s2 += upow * bb;
    su1 += T(j) * upow / u * a;
    su2 += T(j) * upow / u * bb;
    se1 += upow * ae;
    se2 += upow * be;
    T lin = T(eta * g1 - j * gv);
    p += upow * u * lin;
    pu += T(j + 1) * upow * lin;
    pe += upow * u * T((1 - j) * g1 + eta * g2);
  }
  if (!(T(1) + s1 > T(0)) || !(T(1) + s2 > T(0))) {
    throw positivity_error("residual_parts: partial-sum metric degenerate at this (s, eta)");
  }

  ResidualParts<T> out;
  out.value = u * T(w / b) + p - std::log1p(s1) - std::log1p(s2);
  T fu = T(w / b) + pu - su1 / (T(1) + s1) - su2 / (T(1) + s2);
  out.ds = -u * u * fu;
  if (eta == 0.0) {
    out.deta = T(0);  // residual is even in eta
  } else {
    out.deta = u * T(b * eta / w) + pe - se1 / (T(1) + s1) - se2 / (T(1) + s2);
  }
  return out;
}

inline double residual(const CorrectionSeries& cs, double s, double eta) {
  return residual_parts<double>(cs, cs.order(), s, eta).value;
}

inline double residual(const CorrectionSeries& cs, int kuse, double s, double eta) {
  return residual_parts<double>(cs, kuse, s, eta).value;
}

/// Partial sum \hat G^{(k)}(s, eta) itself (the potential, not the residual).
inline double partial_sum(const CorrectionSeries& cs, int kuse, double s, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("partial_sum: eta must be positive");
  double v = g0(cs.b, s, eta);
  double u = 1.0 / s, upow = 1.0;
  kuse = std::min(kuse, cs.order());
  for (int j = 1; j <= kuse; ++j) {
    upow *= u;
    v += upow * cs.term(j).value(eta);
  }
  return v;
}

inline double partial_sum(const CorrectionSeries& cs, double s, double eta) {
  return partial_sum(cs, cs.order(), s, eta);
}

/// Eigenvalues of the partial-sum metric in (s, eta) variables:
/// phi = (w/(b eta))(1+S1), psi = (b eta/w)(1+S2).  Cancellation-free.
inline MetricEigenvalues series_eigenvalues(const CorrectionSeries& cs, int kuse, double s,
                                            double eta) {
  if (!(eta > 0.0)) throw std::domain_error("series_eigenvalues: eta must be positive");
  const double b = cs.b;
  const double w = std::sqrt(1.0 + b * b * eta * eta);
  double u = 1.0 / s, upow = 1.0, s1 = 0.0, s2 = 0.0;
  kuse = std::min(kuse, cs.order());
  for (int j = 1; j <= kuse; ++j) {
    const auto& g = cs.term(j);
    double g1 = g.d1(eta), g2 = g.d2(eta);
    upow *= u;
    s1 += upow * (b * eta / w) * g1;
    s2 += upow * (w / (b * eta)) * (g1 + eta * g2);
  }
  return {(w / (b * eta)) * (1.0 + s1), (b * eta / w) * (1.0 + s2)};
}

/// The corrected cap in physical (t, rho) variables via s = t, eta = t rho.
struct CorrectedCapPieces {
  double value = 0.0;
  double d1 = 0.0;  // d/drho at fixed t
  double d2 = 0.0;
  double dt = 0.0;  // d/dt at fixed rho
  double phi = 0.0, psi = 0.0;
};

inline CorrectedCapPieces corrected_cap(const CorrectionSeries& cs, int kuse, double t,
                                        double rho) {
  if (!(t > 0.0) || !(rho > 0.0)) throw std::domain_error("corrected_cap: need t, rho > 0");
  const double b = cs.b;
  const double eta = t * rho;
  const double w = std::sqrt(1.0 + b * b * eta * eta);
  const double u = 1.0 / t;
  kuse = std::min(kuse, cs.order());

  double gsum = 0.0, jgsum = 0.0, s1 = 0.0, s2 = 0.0, upow = 1.0;
  for (int j = 1; j <= kuse; ++j) {
    const auto& g = cs.term(j);
    double gv = g.value(eta), g1 = g.d1(eta), g2 = g.d2(eta);
    upow *= u;
    gsum += upow * gv;
    jgsum += upow * u * j * gv;
    s1 += upow * (b * eta / w) * g1;
    s2 += upow * (w / (b * eta)) * (g1 + eta * g2);
  }

  CorrectedCapPieces out;
  out.value = 2.0 * (t * std::log(t) - t) + eh_potential(b, eta) / b + gsum;
  out.phi = (w / (b * rho)) * (1.0 + s1);
  out.psi = (b * t * t * rho / w) * (1.0 + s2);
  out.d1 = out.phi;
  out.d2 = (out.psi - out.phi) / rho;
  out.dt = 2.0 * std::log(t) + u * (w / b) * (1.0 + s1) - jgsum;
  return out;
}

/// RadialProfile adapter over corrected_cap, with stable eigenvalues and the
/// cap scale b*t exposed for area extrapolation.
struct CorrectedCapProfile {
  const CorrectionSeries* series = nullptr;
  int kuse = 0;
  double t = 1.0;

  double time() const { return t; }
  double scale() const { return series->b * t; }
  double value(double rho) const { return corrected_cap(*series, kuse, t, rho).value; }
  double d1(double rho) const { return corrected_cap(*series, kuse, t, rho).d1; }
  double d2(double rho) const { return corrected_cap(*series, kuse, t, rho).d2; }
  MetricEigenvalues eigenvalues(double rho) const {
    auto p = corrected_cap(*series, kuse, t, rho);
    return {p.phi, p.psi};
  }
};

/// f_EH^{(k)}(t, rho): the flow deviation of the corrected cap.
inline double f_eh(const CorrectionSeries& cs, int kuse, double t, double rho) {
  return residual_parts<double>(cs, kuse, t, t * rho).value;
}

inline double f_eh(const CorrectionSeries& cs, double t, double rho) {
  return f_eh(cs, cs.order(), t, rho);
}

/// |grad f|^2 = (w/b) (dF/deta)^2; returns |grad f|.
inline double f_eh_gradient_norm(const CorrectionSeries& cs, double t, double rho) {
  double eta = t * rho;
  double w = std::sqrt(1.0 + cs.b * cs.b * eta * eta);
  auto r = residual_parts<double>(cs, cs.order(), t, eta);
  return std::sqrt(w / cs.b) * std::abs(r.deta);
}

/// df/dt at fixed rho = (eta/s) dF/deta + dF/ds.
inline double f_eh_time_derivative(const CorrectionSeries& cs, double t, double rho) {
  auto r = residual_parts<double>(cs, cs.order(), t, t * rho);
  return rho * r.deta + r.ds;
}

/// Source extraction H^(j): the u^j coefficient of the residual of the
/// previous partial sum, divided by the linearization weight w/b.  For
/// j <= 4 the coefficient is cross-checked against Richardson extrapolation
/// of s^j * residual over s in {1e3, 4e3, 1.6e4}; higher orders sit below
/// the double-precision cancellation floor of the direct evaluation and are
/// extracted by the series path alone.
inline EtaFunction extract_source(double b, int j, const CorrectionSeries& previous,
                                  double eta_max) {
  if (j < 1) throw std::domain_error("extract_source: j must be >= 1");
  if (previous.order() < j - 1) {
    throw std::domain_error("extract_source: previous series is too short");
  }

  std::vector<double> poly(static_cast<std::size_t>(j), 0.0);
  poly.back() = static_cast<double>(j + 2) / std::pow(3.0, j);  // (j+2)/3^j eta^{j-1}

  auto extracted = [&](double eta) {
    USeries f = residual_series(previous, j, eta);
    double w = std::sqrt(1.0 + b * b * eta * eta);
    double series_val = (b / w) * f[static_cast<std::size_t>(j)];
    // Extrapolation cross-check: only through j = 3.  The s^j scaling
    // amplifies the imperfect u^1-cancellation of the partial sum (the
    // interpolant's operator defect, ~1e-13 with 1/eta growth) by
    // s_max^{j-1}; at j = 4 that noise exceeds the H_4 signal near the
    // origin.  Order 4 is covered by the operator round-trip instead.
    if (j <= 3 && eta <= 2.0) {
      const double s0 = 1e3, ratio = 4.0;
      const int levels = 3;
      auto probe = [&](double s) {
        auto r = residual_parts<long double>(previous, j - 1, static_cast<long double>(s), eta);
        return static_cast<double>(std::pow(static_cast<long double>(s), j) * r.value);
      };
      double cross = (b / w) * richardson_power(probe, s0, ratio, levels).limit;
      // the s^j scaling amplifies the extended-precision evaluation floor
      // eps * s^{-1} of the residual; keep the gate above that noise
      double smax = s0 * std::pow(ratio, levels - 1);
      double floor = 64.0 * static_cast<double>(std::numeric_limits<long double>::epsilon()) *
                     std::pow(smax, j - 1);
      if (std::abs(cross - series_val) > 1e-6 * std::max(1.0, std::abs(series_val)) + floor) {
        throw accuracy_error("extract_source: series and extrapolation paths disagree at eta " +
                             std::to_string(eta));
      }
    }
    return series_val;
  };

  EtaFunction ef;  // capture poly by value before moving
  {
    std::vector<double> poly_copy = poly;
    ef = EtaFunction::from_callable(std::move(poly_copy), b, eta_max, [&](double eta) {
      double pv = 0.0, x = 1.0;
      for (double c : poly) {
        pv += c * x;
        x *= eta;
      }
      return extracted(eta) - pv;
    });
  }
  return ef;
}

/// Inverse of the linearized operator by the integrating-factor double
/// integral, both integrals from 0.  The declared polynomial part of H is
/// lifted exactly (a eta^l -> a eta^{l+2}/((l+2)(l+3))); the remainder source
/// is integrated spectrally panel by panel.  G' comes from the one-integral
/// representation and G'' from the operator identity, so all derivative data
/// is quadrature-accurate rather than differentiated.
inline EtaFunction solve_correction(double b, const EtaFunction& h, double eta_max) {
  const auto& hp = h.poly();
  std::vector<double> gpoly(hp.size() + 2, 0.0);
  std::vector<double> bpoly(hp.empty() ? 0 : hp.size(), 0.0);
  for (std::size_t l = 0; l < hp.size(); ++l) {
    double denom = static_cast<double>((l + 2) * (l + 3));
    gpoly[l + 2] = hp[l] / denom;
    bpoly[l] = hp[l] / static_cast<double>(l + 3);  // (l+2) * gpoly coefficient
  }
  auto source = [&](double tau) {
    double w2 = 1.0 + b * b * tau * tau;
    double bv = 0.0, x = 1.0;
    for (double c : bpoly) {
      bv += c * x;
      x *= tau;
    }
    return h.remainder_value(tau) + bv / w2;  // H - L[poly part] with exact cancellation
  };
  const double xi_max = std::asinh(b * eta_max);
  auto edges = PanelizedChebyshev::panel_edges(xi_max);
  const std::size_t n = EtaFunction::panel_points;

  // Both layers of the double integral are done spectrally: sample the
  // integrand at the panel nodes, integrate the interpolant exactly via its
  // Chebyshev antiderivative, accumulate across panels.  No nested adaptive
  // quadrature, and integration damps rather than amplifies node noise.
  // In the lifted variable xi = asinh(b eta) one has w = cosh(xi), so the
  // integrands below are as smooth as the source itself.
  std::vector<std::vector<double>> pv, p1, p2;
  double inner_acc = 0.0, outer_acc = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    auto xi = ChebPanel::lobatto_nodes(edges[i].first, edges[i].second, n);
    std::vector<double> eta(n + 1), ch(n + 1), inner_v(n + 1), sv(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
      eta[m] = std::sinh(xi[m]) / b;
      ch[m] = std::cosh(xi[m]);
      sv[m] = source(eta[m]);
      inner_v[m] = eta[m] * ch[m] * sv[m] * ch[m] / b;  // tau w H dtau/dxi
    }
    auto inner_cum = ChebPanel::from_values(edges[i].first, edges[i].second, inner_v)
                         .antiderivative_at_nodes();
    std::vector<double> d1v(n + 1), outer_v(n + 1), d2v(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
      double I = inner_acc + inner_cum[m];
      if (eta[m] == 0.0) {
        d1v[m] = 0.0;
        d2v[m] = sv[m] / 2.0;  // even-extension limit of the inverse
      } else {
        d1v[m] = I / (eta[m] * ch[m]);
        d2v[m] = sv[m] - (1.0 / eta[m] + b * b * eta[m] / (ch[m] * ch[m])) * d1v[m];
      }
      outer_v[m] = d1v[m] * ch[m] / b;  // R' dsigma/dxi
    }
    auto outer_cum = ChebPanel::from_values(edges[i].first, edges[i].second, outer_v)
                         .antiderivative_at_nodes();
    std::vector<double> rv(n + 1);
    for (std::size_t m = 0; m <= n; ++m) rv[m] = outer_acc + outer_cum[m];
    inner_acc += inner_cum.back();
    outer_acc += outer_cum.back();
    pv.push_back(std::move(rv));
    p1.push_back(std::move(d1v));
    p2.push_back(std::move(d2v));
  }
  return EtaFunction(std::move(gpoly), b, eta_max,
                     PanelizedChebyshev::from_values(edges, std::move(pv)),
                     PanelizedChebyshev::from_values(edges, std::move(p1)),
                     PanelizedChebyshev::from_values(edges, std::move(p2)));
}

inline CorrectionSeries build_correction_series(double b, int k, double eta_max = 1e3) {
  if (!(b > 0.0)) throw config_error("correction series: b must be positive");
  if (k < 0 || k > 6) throw config_error("correction series: order must lie in [0, 6]");
  if (!(eta_max > 1.0)) throw config_error("correction series: eta_max must exceed 1");
  CorrectionSeries cs;
  cs.b = b;
  cs.eta_max = eta_max;
  for (int j = 1; j <= k; ++j) {
    EtaFunction h = extract_source(b, j, cs, eta_max);
    cs.terms.push_back(solve_correction(b, h, eta_max));
    cs.sources.push_back(std::move(h));
  }
  return cs;
}

/// Fitted eta^{j+1} coefficient of G^(j) over the far window [1e2, 1e3],
/// against the basis {eta^{j+1}, eta^j log eta, eta^j} that captures the
/// remainder's growth.  Columns are RMS-normalized before the normal
/// equations; the fit residual guards against structural surprises.
inline double asymptotic_coefficient(const CorrectionSeries& cs, int j) {
  if (j < 1 || j > cs.order()) throw std::domain_error("asymptotic_coefficient: bad index");
  const auto& g = cs.term(j);
  const int npts = 40;
  const double lo = 1e2, hi = std::min(1e3, cs.eta_max);
  std::array<std::array<double, 3>, 3> ata{};
  std::array<double, 3> aty{};
  std::array<double, 3> norm{};
  std::vector<std::array<double, 3>> rows(npts);
  std::vector<double> ys(npts);
  for (int i = 0; i < npts; ++i) {
    double eta = lo * std::pow(hi / lo, static_cast<double>(i) / (npts - 1));
    rows[i] = {std::pow(eta, j + 1), std::pow(eta, j) * std::log(eta), std::pow(eta, j)};
    ys[i] = g.value(eta);
  }
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int i = 0; i < npts; ++i) s += rows[i][c] * rows[i][c];
    norm[c] = std::sqrt(s / npts);
    for (int i = 0; i < npts; ++i) rows[i][c] /= norm[c];
  }
  for (int i = 0; i < npts; ++i) {
    for (int r = 0; r < 3; ++r) {
      aty[r] += rows[i][r] * ys[i];
      for (int c = 0; c < 3; ++c) ata[r][c] += rows[i][r] * rows[i][c];
    }
  }
  // 3x3 gaussian elimination with partial pivoting
  std::array<std::array<double, 4>, 3> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r][c] = ata[r][c];
    m[r][3] = aty[r];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    for (int r = col + 1; r < 3; ++r) {
      double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::array<double, 3> coef{};
  for (int r = 2; r >= 0; --r) {
    double s = m[r][3];
    for (int c = r + 1; c < 3; ++c) s -= m[r][c] * coef[c];
    coef[r] = s / m[r][r];
  }
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < npts; ++i) {
    double fit = coef[0] * rows[i][0] + coef[1] * rows[i][1] + coef[2] * rows[i][2];
    ss_res += (ys[i] - fit) * (ys[i] - fit);
    ss_tot += ys[i] * ys[i];
  }
  if (!(ss_res <= 1e-4 * ss_tot)) {
    throw accuracy_error("asymptotic_coefficient: fit residual too large");
  }
  return coef[0] / norm[0];
}

}  // namespace krflow
