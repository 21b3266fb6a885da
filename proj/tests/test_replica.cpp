#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <gardner/replica.hpp>

#include "oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using gardner::ModelParams;

namespace {

// log H by quadrature of the density (continued fraction far out); no shared
// code with the library's series/erfc branches
double oracle_log_tail_hi(double x) {
  if (x > 30.0) return oracle::cf_log_tail(x);
  if (x >= 0.0) return std::log(oracle::tail_by_quadrature(x));
  return std::log1p(-oracle::tail_by_quadrature(-x));
}

// cheap variant for oracle-side scans (many evaluations)
double oracle_log_tail_fast(double x) {
  if (x > 25.0) return oracle::cf_log_tail(x);
  return std::log(0.5 * std::erfc(x * 0.7071067811865475244));
}

double oracle_gardner_bracket_hi(double q, double alpha, double k) {
  const double a = std::sqrt(q / (1.0 - q)), b = k / std::sqrt(1.0 - q);
  return alpha * oracle::panel_expect([&](double u) { return oracle_log_tail_hi(a * u + b); }) +
         0.5 * q / (1.0 - q) + 0.5 * std::log1p(-q);
}

double oracle_gardner_bracket_fast(double q, double alpha, double k) {
  const double a = std::sqrt(q / (1.0 - q)), b = k / std::sqrt(1.0 - q);
  return alpha * oracle::panel_expect([&](double u) { return oracle_log_tail_fast(a * u + b); }) +
         0.5 * q / (1.0 - q) + 0.5 * std::log1p(-q);
}

double oracle_regularized_bracket_hi(double q, double R, const ModelParams& p) {
  const double W = p.eps + R - q;
  const double a = std::sqrt(q / W), b = p.k / std::sqrt(W);
  return p.alpha * oracle::panel_expect([&](double u) { return oracle_log_tail_hi(a * u + b); }) +
         0.5 * q / (R - q) + 0.5 * std::log(R - q) - 0.5 * p.z * R +
         0.5 * p.h * p.h * (R - q);
}

// frozen reference saddle data (50-digit scripted solve of the stationarity
// system, independent run)
constexpr double saddleA_q = 0.389918603852;
constexpr double saddleA_R = 1.187642883662;
constexpr double saddleA_s = 0.459959226294;
constexpr double saddleA_value = -0.876324045123;
constexpr double saddleB_q = 0.247053265745;
constexpr double saddleB_R = 1.071152540464;

const ModelParams paramsA{0.3, 0.5, 0.1, 1.0, 0.05};
const ModelParams paramsB{0.3, 0.0, 0.3, 1.0, 0.05};

}  // namespace

TEST_CASE("gardner bracket: closed forms and quadrature oracle", "[replica]") {
  REQUIRE_THAT(gardner::gardner_bracket(0.0, 1.3, 0.7),
               WithinAbs(1.3 * oracle_log_tail_hi(0.7), 1e-12));
  REQUIRE_THAT(gardner::gardner_bracket(0.0, 0.5, 0.0), WithinAbs(0.5 * std::log(0.5), 1e-13));
  REQUIRE_THAT(gardner::gardner_bracket(0.5, 1.0, 1.0),
               WithinAbs(oracle_gardner_bracket_hi(0.5, 1.0, 1.0), 1e-9));

  REQUIRE_THROWS_AS(gardner::gardner_bracket(-0.1, 0.5, 0.0), std::domain_error);
  REQUIRE_THROWS_AS(gardner::gardner_bracket(1.0, 0.5, 0.0), std::domain_error);
  REQUIRE_THROWS_AS(gardner::gardner_bracket(1.5, 0.5, 0.0), std::domain_error);
}

TEST_CASE("gardner bracket: unimodal-or-monotone scan brackets the minimizer", "[replica]") {
  const struct {
    double alpha, k;
  } cases[] = {{0.5, 0.0}, {0.3, 1.0}, {1.5, 0.0}, {0.4, 0.5}};
  for (const auto& c : cases) {
    std::vector<double> vals;
    const int n = 396;
    for (int i = 0; i <= n; ++i) vals.push_back(gardner::gardner_bracket(i / 400.0, c.alpha, c.k));
    std::size_t m = 0;
    for (std::size_t i = 1; i < vals.size(); ++i)
      if (vals[i] < vals[m]) m = i;
    for (std::size_t i = 0; i < m; ++i) REQUIRE(vals[i + 1] <= vals[i] + 1e-12);
    for (std::size_t i = m; i + 1 < vals.size(); ++i) REQUIRE(vals[i + 1] >= vals[i] - 1e-12);

    const auto fe = gardner::gardner_free_energy(c.alpha, c.k);
    REQUIRE(std::abs(fe.q_star - m / 400.0) <= 1.0 / 400.0 + 1e-12);
  }
}

TEST_CASE("gardner free energy: reference point and scan oracle", "[replica]") {
  const auto fe = gardner::gardner_free_energy(0.5, 0.0);
  REQUIRE_THAT(fe.value, WithinAbs(oracle::frozen::gardner_F_at_half, 1e-9));
  REQUIRE_THAT(fe.q_star, WithinAbs(oracle::frozen::gardner_q_at_half, 1e-8));
  REQUIRE(fe.value <= gardner::gardner_bracket(0.0, 0.5, 0.0));

  // independent two-stage scan of the same functional
  const auto scan = oracle::grid_golden_min(
      [](double q) { return oracle_gardner_bracket_fast(q, 0.5, 0.0); }, 0.0, 0.95, 256);
  REQUIRE_THAT(fe.value, WithinAbs(scan.second, 1e-6));
  REQUIRE_THAT(fe.q_star, WithinAbs(scan.first, 1e-6));

  // first-order optimality at the reported minimizer
  const double fd = oracle::fd_derivative(
      [](double q) { return gardner::gardner_bracket(q, 0.5, 0.0); }, fe.q_star, 1e-5);
  REQUIRE(std::abs(fd) < 1e-7);
}

TEST_CASE("gardner free energy: limits, monotonicity, divergence", "[replica]") {
  const auto zero = gardner::gardner_free_energy(0.0, 0.3);
  REQUIRE(zero.value == 0.0);
  REQUIRE(zero.q_star == 0.0);

  const auto tiny = gardner::gardner_free_energy(1e-12, 1.0);
  REQUIRE(std::abs(tiny.value) < 1e-11);
  REQUIRE(tiny.q_star < 1e-9);

  const double ac1 = gardner::critical_capacity(1.0);
  const auto near = gardner::gardner_free_energy(0.95 * ac1, 1.0);
  const auto mid = gardner::gardner_free_energy(0.5 * ac1, 1.0);
  REQUIRE(near.q_star > mid.q_star);

  // strictly decreasing in alpha and in k
  double prev = gardner::gardner_free_energy(0.1, 0.0).value;
  for (double a : {0.3, 0.5, 0.8, 1.2, 1.6}) {
    const double v = gardner::gardner_free_energy(a, 0.0).value;
    REQUIRE(v < prev);
    prev = v;
  }
  // k grid stays below capacity: alpha_c(1.5) ~ 0.3099
  prev = gardner::gardner_free_energy(0.25, 0.0).value;
  for (double k : {0.5, 1.0, 1.5}) {
    const double v = gardner::gardner_free_energy(0.25, k).value;
    REQUIRE(v < prev);
    prev = v;
  }

  REQUIRE_THROWS_AS(gardner::gardner_free_energy(-0.1, 0.0), std::invalid_argument);
  try {
    gardner::gardner_free_energy(1.5, 1.0);
    FAIL("expected diverging_minimum");
  } catch (const gardner::diverging_minimum& d) {
    REQUIRE(d.q_boundary > 1.0 - 1e-6);
    REQUIRE(d.value < -50.0);
  }
  REQUIRE_THROWS_AS(gardner::gardner_free_energy(3.0, 0.0), gardner::diverging_minimum);
}

TEST_CASE("critical capacity: closed form vs quadrature", "[replica]") {
  REQUIRE_THAT(gardner::critical_capacity(0.0), WithinAbs(2.0, 1e-10));
  REQUIRE_THAT(gardner::critical_capacity(1.0), WithinAbs(oracle::frozen::alpha_c_at_1, 1e-12));
  // note: the k=3 value sits just *above* 0.1
  REQUIRE_THAT(gardner::critical_capacity(3.0), WithinAbs(0.10000203439219154, 1e-12));

  gardner::CapacityCurve curve;
  for (int i = 0; i <= 20; ++i) {
    const double k = 0.25 * i;
    const double closed = gardner::critical_capacity(k);
    const double quad = gardner::critical_capacity_by_quadrature(k);
    REQUIRE_THAT(closed, WithinAbs(quad, 1e-10));
    curve.entries.push_back({k, closed});
  }
  REQUIRE_THAT(curve.entries.front().alpha_c, WithinAbs(2.0, 1e-10));
  for (std::size_t i = 0; i + 1 < curve.entries.size(); ++i)
    REQUIRE(curve.entries[i + 1].alpha_c < curve.entries[i].alpha_c);

  REQUIRE_THROWS_AS(gardner::critical_capacity(-0.5), std::domain_error);
  REQUIRE_THROWS_AS(gardner::critical_capacity_by_quadrature(-0.5), std::domain_error);
}

TEST_CASE("regularized bracket: closed forms, continuity, oracle", "[replica]") {
  // alpha = 0, h = 0, q = 0: pure Gaussian volume term
  for (double z : {0.5, 1.0, 2.0}) {
    for (double R : {0.4, 1.0 / z, 3.1}) {
      ModelParams p{0.0, 0.7, 0.0, z, 0.03};
      REQUIRE_THAT(gardner::regularized_bracket(0.0, R, p),
                   WithinAbs(0.5 * std::log(R) - 0.5 * z * R, 1e-14));
    }
    // maximized at R = 1/z
    ModelParams p{0.0, 0.7, 0.0, z, 0.03};
    const double at_opt = gardner::regularized_bracket(0.0, 1.0 / z, p);
    REQUIRE(at_opt > gardner::regularized_bracket(0.0, 0.9 / z, p));
    REQUIRE(at_opt > gardner::regularized_bracket(0.0, 1.1 / z, p));
  }

  // continuity with the hard-constraint bracket
  REQUIRE_THAT(gardner::regularized_bracket(0.0, 1.0, ModelParams{0.5, 0.0, 0.0, 0.0, 1e-12}),
               WithinAbs(0.5 * std::log(0.5), 1e-9));
  for (double k : {0.0, 1.0})
    for (double q : {0.2, 0.5, 0.8}) {
      const double reg =
          gardner::regularized_bracket(q, 1.0, ModelParams{0.4, k, 0.0, 0.0, 1e-11});
      REQUIRE_THAT(reg, WithinAbs(gardner::gardner_bracket(q, 0.4, k), 1e-8));
    }

  REQUIRE_THAT(gardner::regularized_bracket(0.2, 0.8, paramsA),
               WithinAbs(oracle_regularized_bracket_hi(0.2, 0.8, paramsA), 1e-9));

  REQUIRE_THROWS_AS(gardner::regularized_bracket(0.8, 0.8, paramsA), std::domain_error);
  REQUIRE_THROWS_AS(gardner::regularized_bracket(-0.1, 0.8, paramsA), std::domain_error);
}

TEST_CASE("transformed bracket matches the (q,R) form under the change of variables",
          "[replica]") {
  for (double R : {0.8, 1.2})
    for (double q : {0.0, 0.1, 0.45, 0.7}) {
      if (q >= R) continue;
      const double s = q / (R + paramsA.eps - q);
      REQUIRE_THAT(gardner::transformed_bracket(s, R, paramsA),
                   WithinAbs(gardner::regularized_bracket(q, R, paramsA), 1e-12));
    }
}

TEST_CASE("saddle residuals: domain and finite-difference gradients", "[replica]") {
  REQUIRE_THROWS_AS(gardner::saddle_residuals(0.0, 1.0, paramsA), std::domain_error);
  REQUIRE_THROWS_AS(gardner::saddle_residuals(-0.2, 1.0, paramsA), std::domain_error);
  REQUIRE_THROWS_AS(gardner::saddle_residuals(1.0, 0.05, paramsA), std::domain_error);

  // the residual pair is the bracket gradient in (s, R) coordinates up to the
  // factors 2(1+s)/s and 2
  const struct {
    ModelParams p;
    double s, R;
  } pts[] = {
      {paramsA, 0.2, 0.9},
      {paramsA, saddleA_s, saddleA_R},
      {paramsA, 0.7, 1.4},
      {ModelParams{0.7, 0.0, 0.4, 1.2, 0.02}, 0.3, 1.0},
  };
  for (const auto& pt : pts) {
    const auto res = gardner::saddle_residuals(pt.s, pt.R, pt.p);
    const double ds = oracle::fd_derivative(
        [&](double s) { return gardner::transformed_bracket(s, pt.R, pt.p); }, pt.s, 1e-5);
    const double dR = oracle::fd_derivative(
        [&](double R) { return gardner::transformed_bracket(pt.s, R, pt.p); }, pt.R, 1e-5);
    REQUIRE_THAT(res.f1, WithinAbs(2.0 * (1.0 + pt.s) / pt.s * ds,
                                   1e-6 * std::max(1.0, std::abs(res.f1))));
    REQUIRE_THAT(res.f2, WithinAbs(2.0 * dR, 1e-6 * std::max(1.0, std::abs(res.f2))));
  }

  // monotone in s at fixed R (with and without the external field)
  for (double h : {0.1, 0.0}) {
    ModelParams p = paramsA;
    p.h = h;
    double prev = gardner::saddle_residuals(0.05, 1.1, p).f1;
    for (double s = 0.15; s < 2.0; s += 0.1) {
      const double f1 = gardner::saddle_residuals(s, 1.1, p).f1;
      REQUIRE(f1 > prev);
      prev = f1;
    }
  }
}

TEST_CASE("solve saddle: reference point with field", "[replica]") {
  const auto sp = gardner::solve_saddle(paramsA);
  REQUIRE(sp.converged);
  REQUIRE_FALSE(sp.boundary_pinned);
  REQUIRE_THAT(sp.q, WithinAbs(saddleA_q, 1e-6));
  REQUIRE_THAT(sp.R, WithinAbs(saddleA_R, 1e-6));
  REQUIRE_THAT(sp.s, WithinAbs(saddleA_s, 1e-6));
  REQUIRE(std::abs(sp.s - sp.q / (sp.R + paramsA.eps - sp.q)) <= 1e-12);
  REQUIRE(std::abs(sp.residual_f1) <= 1e-9);
  REQUIRE(std::abs(sp.residual_f2) <= 1e-9);
  REQUIRE_THAT(gardner::regularized_bracket(sp.q, sp.R, paramsA),
               WithinAbs(saddleA_value, 1e-8));

  // the direct nested max-min lands on the same point
  const auto opt = gardner::solve_saddle_by_optimization(paramsA);
  REQUIRE_THAT(opt.q, WithinAbs(sp.q, 1e-6));
  REQUIRE_THAT(opt.R, WithinAbs(sp.R, 1e-6));

  // order-parameter identities at the solution
  const auto id = gardner::rs_identities(sp.q, sp.R, paramsA);
  REQUIRE_THAT(id.gap_predicted, WithinAbs(sp.R - sp.q, 1e-8));
  REQUIRE_THAT(id.q_predicted, WithinAbs(sp.q, 1e-8));

  // stationarity: any +-1e-3 poke increases the residual size
  const double base = std::abs(sp.residual_f1) + std::abs(sp.residual_f2);
  for (double d : {1e-3, -1e-3}) {
    const auto rs = gardner::saddle_residuals(sp.s + d, sp.R, paramsA);
    REQUIRE(std::abs(rs.f1) + std::abs(rs.f2) > base);
    const auto rR = gardner::saddle_residuals(sp.s, sp.R + d, paramsA);
    REQUIRE(std::abs(rR.f1) + std::abs(rR.f2) > base);
  }
}

TEST_CASE("solve saddle: field-free reference point and golden-section oracle", "[replica]") {
  const auto sp = gardner::solve_saddle(paramsB);
  REQUIRE(sp.converged);
  REQUIRE_THAT(sp.q, WithinAbs(saddleB_q, 1e-6));
  REQUIRE_THAT(sp.R, WithinAbs(saddleB_R, 1e-6));
  REQUIRE(std::abs(sp.residual_f1) <= 1e-9);
  REQUIRE(std::abs(sp.residual_f2) <= 1e-9);

  // independent nested golden-section max-min of the bracket
  auto inner_min = [&](double R) {
    return oracle::grid_golden_min(
        [&](double q) { return gardner::regularized_bracket(q, R, paramsB); }, 0.0,
        R * (1.0 - 1e-9), 80);
  };
  const auto outer =
      oracle::grid_golden_min([&](double R) { return -inner_min(R).second; }, 0.5, 2.5, 80);
  REQUIRE_THAT(sp.R, WithinAbs(outer.first, 1e-5));
  REQUIRE_THAT(sp.q, WithinAbs(inner_min(outer.first).first, 1e-5));

  const auto id = gardner::rs_identities(sp.q, sp.R, paramsB);
  REQUIRE_THAT(id.gap_predicted, WithinAbs(sp.R - sp.q, 1e-8));
  REQUIRE_THAT(id.q_predicted, WithinAbs(sp.q, 1e-8));
  REQUIRE_THAT(id.q_tilde, WithinAbs(0.27377, 1e-4));
  REQUIRE_THAT(id.U_tilde, WithinAbs(6.06033, 1e-4));
  REQUIRE_THAT(id.Delta, WithinAbs(0.21345, 1e-4));

  const double base = std::abs(sp.residual_f1) + std::abs(sp.residual_f2);
  for (double d : {1e-3, -1e-3}) {
    const auto rs = gardner::saddle_residuals(sp.s + d, sp.R, paramsB);
    REQUIRE(std::abs(rs.f1) + std::abs(rs.f2) > base);
    const auto rR = gardner::saddle_residuals(sp.s, sp.R + d, paramsB);
    REQUIRE(std::abs(rR.f1) + std::abs(rR.f2) > base);
  }
}

TEST_CASE("solve saddle: Gaussian limits", "[replica]") {
  const auto exact = gardner::solve_saddle(ModelParams{0.0, 0.4, 0.5, 2.0, 0.05});
  REQUIRE(exact.converged);
  REQUIRE_THAT(exact.q, WithinAbs(0.0625, 1e-15));
  REQUIRE_THAT(exact.R, WithinAbs(0.5625, 1e-15));

  const auto nofield = gardner::solve_saddle(ModelParams{1e-10, 0.0, 0.0, 1.0, 0.05});
  REQUIRE(nofield.q <= 1e-8);
  REQUIRE_THAT(nofield.R, WithinAbs(1.0, 1e-8));

  const auto field = gardner::solve_saddle(ModelParams{1e-10, 0.0, 0.3, 1.0, 0.05});
  REQUIRE_THAT(field.q, WithinAbs(0.09, 1e-8));
  REQUIRE_THAT(field.R, WithinAbs(1.09, 1e-8));
}

TEST_CASE("solve saddle: field-free zero-margin point solves the gap quadratic", "[replica]") {
  const ModelParams p{0.4, 0.0, 0.0, 1.0, 0.05};
  const auto sp = gardner::solve_saddle(p);
  REQUIRE(sp.converged);
  REQUIRE(std::abs(sp.residual_f1) <= 1e-9);
  REQUIRE(std::abs(sp.residual_f2) <= 1e-9);

  // with h = 0, k = 0 the R-residual is rational: z y^2 - y + eps s(1+s) = 0
  // for y = R - eps s
  const double y = sp.R - p.eps * sp.s;
  const double disc = std::sqrt(1.0 - 4.0 * p.z * p.eps * sp.s * (1.0 + sp.s));
  const double y_hi = (1.0 + disc) / (2.0 * p.z);
  const double y_lo = (1.0 - disc) / (2.0 * p.z);
  REQUIRE(std::min(std::abs(y - y_hi), std::abs(y - y_lo)) <= 1e-9);
}

TEST_CASE("solve saddle: parameter validation", "[replica]") {
  REQUIRE_THROWS_AS(gardner::solve_saddle(ModelParams{2.1, 0.0, 0.0, 1.0, 0.05}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(gardner::solve_saddle(ModelParams{0.3, 0.0, 0.0, 5.0, 0.05}),
                    std::invalid_argument);  // z above eps^{-1/3}
  REQUIRE_THROWS_AS(gardner::solve_saddle(ModelParams{0.3, 0.0, 0.0, 1.0, 0.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(gardner::solve_saddle(ModelParams{0.3, 0.0, 0.0, 0.0, 0.05}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(gardner::solve_saddle(ModelParams{0.3, -1.0, 0.0, 1.0, 0.05}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(gardner::solve_saddle(ModelParams{0.3, 0.0, -0.2, 1.0, 0.05}),
                    std::invalid_argument);
}

TEST_CASE("spherical value: smoothing scan approaches the hard-constraint value", "[replica]") {
  const double target = oracle::frozen::gardner_F_at_half;
  const double eps_grid[] = {0.05, 0.02, 0.01, 0.005};
  std::vector<double> vals, zs;
  for (double e : eps_grid) {
    const auto sv = gardner::spherical_value(0.5, 0.0, e);
    REQUIRE(sv.z_min <= std::pow(e, -1.0 / 3.0) * (1.0 + 1e-9));
    REQUIRE(sv.z_min > 0.0);
    vals.push_back(sv.value);
    zs.push_back(sv.z_min);
  }
  REQUIRE_THAT(vals[0], WithinAbs(-0.37338928, 1e-6));
  REQUIRE_THAT(vals[1], WithinAbs(-0.37581246, 1e-6));
  REQUIRE_THAT(vals[2], WithinAbs(-0.37671377, 1e-6));
  REQUIRE_THAT(zs[0], WithinAbs(0.9925, 2e-3));
  REQUIRE_THAT(zs[1], WithinAbs(0.9965, 2e-3));
  REQUIRE_THAT(zs[2], WithinAbs(0.9981, 2e-3));
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    REQUIRE(vals[i] > target);
    REQUIRE(vals[i + 1] < vals[i]);  // monotone in eps
    REQUIRE(vals[i + 1] - target < vals[i] - target);
  }
  REQUIRE(vals.back() > target);
}

TEST_CASE("spherical value: pure-sphere limit and validity bound", "[replica]") {
  const auto sv = gardner::spherical_value(1e-9, 0.0, 0.05);
  REQUIRE(std::abs(sv.value) < 1e-6);
  REQUIRE_THAT(sv.z_min, WithinAbs(1.0, 1e-3));

  const auto with_margin = gardner::spherical_value(0.3, 1.0, 0.02);
  REQUIRE(with_margin.z_min <= std::pow(0.02, -1.0 / 3.0) * (1.0 + 1e-9));
  REQUIRE(std::isfinite(with_margin.value));

  REQUIRE_THROWS_AS(gardner::spherical_value(0.5, 0.0, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(gardner::spherical_value(2.5, 0.0, 0.05), std::invalid_argument);
}
