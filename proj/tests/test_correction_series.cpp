#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "krflow/area.hpp"
#include "krflow/correction.hpp"
#include "krflow/quadrature.hpp"

using namespace krflow;
using Catch::Approx;

namespace {

const CorrectionSeries& series_b1() {
  static CorrectionSeries cs = build_correction_series(1.0, 3);
  return cs;
}

const CorrectionSeries& series_b2() {
  static CorrectionSeries cs = build_correction_series(2.0, 3);
  return cs;
}

// First correction solved by hand: (1/(3b^2)) [ b^2 eta^2 / 2 + log((1+w)/2) ].
double g1_closed(double b, double eta) {
  double w = std::sqrt(1.0 + b * b * eta * eta);
  return (b * b * eta * eta / 2.0 + std::log((1.0 + w) / 2.0)) / (3.0 * b * b);
}

double g1_closed_d1(double b, double eta) {
  double w = std::sqrt(1.0 + b * b * eta * eta);
  return (eta / 3.0) * (1.0 + 1.0 / (w * (1.0 + w)));
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n + 1);
  for (int i = 0; i <= n; ++i) g[i] = lo * std::pow(hi / lo, double(i) / n);
  return g;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("order zero residual is w over b s", "[correction]") {
  for (double b : {1.0, 2.0}) {
    auto cs = build_correction_series(b, 0);
    REQUIRE(cs.order() == 0);
    for (double s : {2.0, 1e2, 1e5}) {
      for (double eta : {0.0, 0.3, 7.0, 500.0}) {
        double w = std::sqrt(1.0 + b * b * eta * eta);
        CHECK_THAT(residual(cs, s, eta),
                   Catch::Matchers::WithinRel(w / (b * s), 1e-14));
      }
      // with no correction terms the potential is the glued leading model
      CHECK(partial_sum(cs, s, 0.25) == Approx(g0(b, s, 0.25)).epsilon(1e-15));
    }
  }
}

TEST_CASE("first correction matches its closed form", "[correction]") {
  for (const auto* cs : {&series_b1(), &series_b2()}) {
    double b = cs->b;
    const auto& g1 = cs->term(1);
    for (double eta : log_grid(1e-3, 50.0, 220)) {
      double want = g1_closed(b, eta);
      CHECK_THAT(g1.value(eta), Catch::Matchers::WithinRel(want, 1e-8));
      CHECK_THAT(g1.d1(eta), Catch::Matchers::WithinRel(g1_closed_d1(b, eta), 1e-8));
    }
    // higher derivatives against differences of the closed-form slope
    for (double eta : log_grid(5e-2, 20.0, 40)) {
      double h = 1e-3 * std::max(eta, 1.0);
      double d2 = (g1_closed_d1(b, eta + h) - g1_closed_d1(b, eta - h)) / (2.0 * h);
      double d3 = (g1_closed_d1(b, eta + h) - 2.0 * g1_closed_d1(b, eta) +
                   g1_closed_d1(b, eta - h)) /
                  (h * h);
      CHECK(g1.d2(eta) == Approx(d2).margin(1e-7 * std::max(1.0, std::abs(d2))));
      CHECK(g1.d3(eta) == Approx(d3).margin(1e-4 * std::max(1.0, std::abs(d3))));
    }
  }
}

TEST_CASE("first source is identically one", "[correction]") {
  for (const auto* cs : {&series_b1(), &series_b2()}) {
    const auto& h1 = cs->source(1);
    REQUIRE(h1.poly().size() == 1);
    CHECK(h1.poly()[0] == Approx(1.0).epsilon(1e-12));
    for (double eta : log_grid(1e-3, 1e3, 120)) {
      CHECK(h1.value(eta) == Approx(1.0).margin(1e-8));
    }
    CHECK(h1.value(0.0) == Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("polynomial parts follow the cascade weights", "[correction]") {
  // sources carry (j+2)/3^j eta^{j-1}, corrections eta^{j+1}/((j+1) 3^j),
  // independent of b
  for (const auto* cs : {&series_b1(), &series_b2()}) {
    for (int j = 1; j <= 3; ++j) {
      const auto& hp = cs->source(j).poly();
      REQUIRE(hp.size() == static_cast<std::size_t>(j));
      for (int l = 0; l + 1 < j; ++l) CHECK(hp[l] == 0.0);
      CHECK_THAT(hp.back(),
                 Catch::Matchers::WithinRel((j + 2.0) / std::pow(3.0, j), 1e-14));

      const auto& gp = cs->term(j).poly();
      REQUIRE(gp.size() == static_cast<std::size_t>(j + 2));
      for (int l = 0; l + 1 < j + 2; ++l) CHECK(gp[l] == 0.0);
      CHECK_THAT(gp.back(),
                 Catch::Matchers::WithinRel(1.0 / ((j + 1.0) * std::pow(3.0, j)), 1e-14));
    }
  }
}

TEST_CASE("frozen interior values", "[correction]") {
  // regression pins at b = 1; backed by the operator round-trip and the
  // direct quadrature cross-checks below
  const auto& cs = series_b1();
  CHECK(cs.source(2).value(1.0) == Approx(0.610555845706).margin(1e-9));
  CHECK(cs.source(2).value(0.5) == Approx(0.514705309890).margin(1e-9));
  CHECK(cs.source(3).value(1.0) == Approx(0.252581246375).margin(1e-9));
  CHECK(cs.term(2).value(1.0) == Approx(0.1191506699591).margin(1e-10));
  CHECK(cs.term(3).value(1.0) == Approx(0.03992194967953).margin(1e-10));
}

TEST_CASE("corrections solve their defining equation", "[correction]") {
  for (const auto* cs : {&series_b1(), &series_b2()}) {
    for (int j = 1; j <= 3; ++j) {
      double worst = 0.0;
      for (double eta : log_grid(1e-2, 1e2, 60)) {
        double lg = linearized_operator(cs->b, cs->term(j), eta);
        double hv = cs->source(j).value(eta);
        worst = std::max(worst, std::abs(lg - hv) / std::max(1.0, std::abs(hv)));
      }
      CHECK(worst < 1e-8);
    }
  }
}

TEST_CASE("direct double integral cross-check", "[correction]") {
  // independent evaluation of G = int (sigma w)^-1 int tau w H dtau dsigma
  for (const auto* cs : {&series_b1(), &series_b2()}) {
    double b = cs->b;
    QuadratureControl inner_ctl;
    QuadratureControl outer_ctl;  // the outer integrand carries inner noise
    outer_ctl.rel_tol = 1e-10;
    outer_ctl.abs_tol = 1e-11;
    outer_ctl.max_depth = 10;
    for (double spot : {0.7, 5.0}) {
      auto inner = [&](double sig) {
        return integrate(
            [&](double tau) {
              double wt = std::sqrt(1.0 + b * b * tau * tau);
              return tau * wt * cs->source(1).value(tau);
            },
            0.0, sig, inner_ctl);
      };
      double direct = integrate(
          [&](double sig) { return inner(sig) / (sig * std::sqrt(1.0 + b * b * sig * sig)); },
          0.0, spot, outer_ctl);
      CHECK_THAT(cs->term(1).value(spot), Catch::Matchers::WithinRel(direct, 1e-9));
    }
  }
}

TEST_CASE("far-field coefficients match the hyperbolic weights", "[correction]") {
  const auto& cs = series_b1();
  for (int j = 1; j <= 3; ++j) {
    double c = asymptotic_coefficient(cs, j);
    CHECK_THAT(c, Catch::Matchers::WithinRel(1.0 / ((j + 1.0) * std::pow(3.0, j)), 5e-4));
  }
}

TEST_CASE("residual decays one order faster per correction", "[correction]") {
  const auto& cs = series_b1();
  std::vector<double> svals = log_grid(1e2, 1e5, 12);
  for (int k = 0; k <= 2; ++k) {
    std::vector<double> lx, ly;
    for (double s : svals) {
      double sup = 0.0;
      for (int m = 0; m <= 50; ++m) {
        sup = std::max(sup, std::abs(residual(cs, k, s, m / 50.0)));
      }
      lx.push_back(std::log(s));
      ly.push_back(std::log(sup));
    }
    CHECK(fit_slope(lx, ly) == Approx(-(k + 1.0)).margin(0.05));

    for (double eta : {0.5, 1.0, 2.0}) {
      std::vector<double> fy;
      for (double s : svals) fy.push_back(std::log(std::abs(residual(cs, k, s, eta))));
      CHECK(fit_slope(lx, fy) == Approx(-(k + 1.0)).margin(0.1));
    }
  }
}

TEST_CASE("residual derivatives match finite differences", "[correction]") {
  // low orders at moderate s keep the residual well above the difference
  // noise floor; the derivative formulas do not branch on order
  const auto& cs = series_b2();
  struct Pt {
    int k;
    double s, eta;
  };
  for (auto [k, s, eta] : {Pt{1, 50.0, 0.7}, Pt{2, 50.0, 2.0}, Pt{1, 317.0, 0.05}}) {
    auto r = residual_parts<double>(cs, k, s, eta);
    double hs = 1e-2 * s;
    double ds = (residual(cs, k, s + hs, eta) - residual(cs, k, s - hs, eta)) / (2.0 * hs);
    CHECK(r.ds == Approx(ds).epsilon(1e-3));
    double he = 1e-3 * std::max(eta, 0.1);
    double de = (residual(cs, k, s, eta + he) - residual(cs, k, s, eta - he)) / (2.0 * he);
    CHECK(r.deta == Approx(de).epsilon(1e-4).margin(1e-12));
  }
  // on the axis the residual is even in eta
  auto r0 = residual_parts<double>(cs, 3, 1e3, 0.0);
  CHECK(r0.deta == 0.0);
}

TEST_CASE("series expansion of the residual cancels through its order", "[correction]") {
  const auto& cs = series_b1();
  for (double eta : {0.0, 0.4, 1.7}) {
    auto rs = residual_series(cs, 4, eta);
    double scale = std::sqrt(1.0 + eta * eta);
    CHECK(std::abs(rs.at(1)) < 1e-12 * scale);
    CHECK(std::abs(rs.at(2)) < 1e-12 * scale);
    CHECK(std::abs(rs.at(3)) < 1e-12 * scale);
  }
}

TEST_CASE("corrected cap is consistent in physical variables", "[correction]") {
  const auto& cs = series_b2();
  double b = cs.b;
  for (double t : {10.0, 1e3}) {
    CorrectedCapProfile prof{&cs, 3, t};
    for (double rho : {1e-3, 0.2, 0.9}) {
      if (t * rho > 0.9 * cs.eta_max) continue;
      auto c = corrected_cap(cs, 3, t, rho);
      CHECK(c.value == Approx(partial_sum(cs, t, t * rho)).epsilon(1e-13));

      double h = 1e-4 * rho;
      double d1 = (corrected_cap(cs, 3, t, rho + h).value -
                   corrected_cap(cs, 3, t, rho - h).value) /
                  (2.0 * h);
      CHECK_THAT(c.d1, Catch::Matchers::WithinRel(d1, 1e-6));
      CHECK(c.phi == c.d1);
      CHECK_THAT(c.psi, Catch::Matchers::WithinRel(c.d1 + rho * c.d2, 1e-9));

      double ht = 1e-3 * t;
      double dt = (corrected_cap(cs, 3, t + ht, rho).value -
                   corrected_cap(cs, 3, t - ht, rho).value) /
                  (2.0 * ht);
      CHECK_THAT(c.dt, Catch::Matchers::WithinRel(dt, 1e-5));

      auto ev = prof.eigenvalues(rho);
      CHECK(ev.phi == c.phi);
      CHECK(ev.psi == c.psi);
    }
    CHECK_THAT(exceptional_area_coefficient(prof),
               Catch::Matchers::WithinRel(1.0 / b, 1e-6));
  }
}

TEST_CASE("flow deviation closed forms at order zero", "[correction]") {
  auto cs = build_correction_series(2.0, 0);
  double b = cs.b;
  for (double t : {5.0, 4e2}) {
    for (double rho : {1e-2, 0.8}) {
      double eta = t * rho;
      double w = std::sqrt(1.0 + b * b * eta * eta);
      CHECK_THAT(f_eh(cs, t, rho), Catch::Matchers::WithinRel(w / (b * t), 1e-13));
      CHECK_THAT(f_eh_gradient_norm(cs, t, rho),
                 Catch::Matchers::WithinRel(rho * std::sqrt(b / w), 1e-13));
      double ht = 1e-3 * t;
      double dt = (f_eh(cs, t + ht, rho) - f_eh(cs, t - ht, rho)) / (2.0 * ht);
      CHECK_THAT(f_eh_time_derivative(cs, t, rho), Catch::Matchers::WithinRel(dt, 1e-5));
    }
  }
}

TEST_CASE("partial-sum metric stays positive over the working range", "[correction]") {
  const auto& cs = series_b1();
  for (double s : {5.0, 50.0, 1e3, 1e5}) {
    for (double eta : log_grid(1e-3, 0.9 * cs.eta_max, 80)) {
      auto ev = series_eigenvalues(cs, 3, s, eta);
      CHECK(ev.phi > 0.0);
      CHECK(ev.psi > 0.0);
      CHECK(std::isfinite(residual(cs, s, eta)));
    }
  }
}

TEST_CASE("series construction rejects bad input", "[correction]") {
  CHECK_THROWS_AS(build_correction_series(0.0, 1), config_error);
  CHECK_THROWS_AS(build_correction_series(-1.0, 2), config_error);
  CHECK_THROWS_AS(build_correction_series(1.0, 7), config_error);
  CHECK_THROWS_AS(build_correction_series(1.0, -1), config_error);
  CHECK_THROWS_AS(build_correction_series(1.0, 2, 0.5), config_error);

  const auto& cs = series_b1();
  CHECK_THROWS_AS(partial_sum(cs, 10.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(residual(cs, -2.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(residual(cs, 10.0, -1.0), std::domain_error);
  CHECK_THROWS_AS(corrected_cap(cs, 3, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(corrected_cap(cs, 3, 1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(series_eigenvalues(cs, 3, 10.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(cs.term(4), std::out_of_range);
  CHECK_THROWS_AS(cs.term(1).value(2.0 * cs.eta_max), std::domain_error);
}

TEST_CASE("custom domain cap", "[correction]") {
  auto cs = build_correction_series(1.0, 1, 50.0);
  for (double eta : log_grid(1e-3, 49.0, 60)) {
    CHECK_THAT(cs.term(1).value(eta),
               Catch::Matchers::WithinRel(g1_closed(1.0, eta), 1e-8));
  }
  CHECK_THROWS_AS(cs.term(1).value(60.0), std::domain_error);
}
