#pragma once
// Replica-symmetric theory for the spherical perceptron with stability margin
// k: the quenched free-energy functional, its regularized (smoothed, field-
// and radius-tilted) extension, the critical capacity line, and the
// saddle-point solver for the order parameters (q, R).
//
// Two independent evaluation routes are shipped on purpose: solve_saddle
// finds roots of the analytic stationarity residuals, while
// solve_saddle_by_optimization does a direct nested max-min of the bracket.
// They are cross-checked in the test suite.

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <gardner/errors.hpp>
#include <gardner/specfn.hpp>

namespace gardner {

struct ModelParams {
  double alpha = 0.0;  // constraints per coupling (p/N)
  double k = 0.0;      // stability margin
  double h = 0.0;      // external field scale
  double z = 1.0;      // quadratic confinement weight
  double eps = 0.05;   // constraint smoothing variance
};

// Validity window of the regularized saddle problem.
inline void validate_saddle_params(const ModelParams& p) {
  if (!(p.alpha >= 0.0 && p.alpha < 2.0))
    throw std::invalid_argument("alpha must lie in [0, 2)");
  if (!(p.k >= 0.0)) throw std::invalid_argument("k must be nonnegative");
  if (!(p.h >= 0.0)) throw std::invalid_argument("h must be nonnegative");
  if (!(p.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(p.z > 0.0)) throw std::invalid_argument("z must be positive");
  if (p.z > std::pow(p.eps, -1.0 / 3.0) * (1.0 + 1e-12))
    throw std::invalid_argument("z exceeds eps^(-1/3) validity bound");
}

struct SaddlePoint {
  double q = 0.0;
  double R = 0.0;
  double s = 0.0;  // q / (R + eps - q)
  double residual_f1 = 0.0;
  double residual_f2 = 0.0;
  int iterations = 0;
  bool converged = false;
  bool boundary_pinned = false;  // inner root ran into s -> R/eps
};

struct SaddleResiduals {
  double f1 = 0.0;
  double f2 = 0.0;
};

struct GardnerMinimum {
  double value = 0.0;
  double q_star = 0.0;
};

struct CapacityPoint {
  double k = 0.0;
  double alpha_c = 0.0;
};

struct CapacityCurve {
  std::vector<CapacityPoint> entries;
};

struct SphericalValue {
  double value = 0.0;
  double z_min = 0.0;
  double R_at_min = 0.0;
  double q_at_min = 0.0;
};

// ---------------------------------------------------------------------------
// Gardner functional
// ---------------------------------------------------------------------------

// alpha E log H((u sqrt q + k)/sqrt(1-q)) + q/(2(1-q)) + log(1-q)/2
inline double gardner_bracket(double q, double alpha, double k,
                              const GaussianQuadrature& rule = default_quadrature()) {
  if (!(q >= 0.0 && q < 1.0)) throw std::domain_error("q must lie in [0, 1)");
  const double omq = 1.0 - q;
  const double a = std::sqrt(q / omq);
  const double b = k / std::sqrt(omq);
  const double expect =
      gaussian_expect([&](double u) { return log_gauss_tail(a * u + b); }, rule);
  return alpha * expect + 0.5 * q / omq + 0.5 * std::log1p(-q);
}

namespace detail {

// d/dq of gardner_bracket, written with E{u g(u)} = E{g'(u)} applied to the
// expectation term so nothing is singular at q = 0.
inline double gardner_bracket_dq(double q, double alpha, double k,
                                 const GaussianQuadrature& rule) {
  const double omq = 1.0 - q;
  const double a = std::sqrt(q / omq);
  const double b = k / std::sqrt(omq);
  double ea = 0.0, eap = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = a * rule.nodes[i] + b;
    const double A = tail_ratio(x);
    ea += rule.weights[i] * A;
    eap += rule.weights[i] * A * (A - x);
  }
  const double d_expect = -(0.5 / (omq * omq) * eap + 0.5 * k / (omq * std::sqrt(omq)) * ea);
  return alpha * d_expect + 0.5 / (omq * omq) - 0.5 / omq;
}

}  // namespace detail

// Minimize the bracket over q in [0, 1 - 1e-10].  Above capacity the
// minimizer runs into the q -> 1 boundary and the value plunges; that regime
// is reported as diverging_minimum (thresholds below are deliberate, not
// derived).  An interior minimum is sharpened to a root of the q-derivative.
inline GardnerMinimum gardner_free_energy(double alpha, double k,
                                          const GaussianQuadrature& rule = default_quadrature(),
                                          double divergence_floor = -50.0,
                                          double divergence_boundary = 1.0 - 1e-6) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
  if (!(k >= 0.0)) throw std::invalid_argument("k must be nonnegative");
  if (alpha == 0.0) return {0.0, 0.0};

  const double q_cap = 1.0 - 1e-10;
  auto f = [&](double q) { return gardner_bracket(q, alpha, k, rule); };

  // coarse grid plus a geometric approach to the boundary
  std::vector<double> grid;
  for (int i = 0; i <= 250; ++i) grid.push_back(i / 256.0);
  for (double gap = 1.0 / 512.0; gap > 2e-10; gap *= 0.5) grid.push_back(1.0 - gap);
  grid.push_back(q_cap);

  std::size_t best = 0;
  double best_val = f(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = f(grid[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (grid[best] > divergence_boundary && best_val < divergence_floor)
    throw diverging_minimum(grid[best], best_val);

  const double lo = grid[best > 0 ? best - 1 : 0];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  std::uintmax_t it = 200;
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, 40, it);
  if (r.first > divergence_boundary && r.second < divergence_floor)
    throw diverging_minimum(r.first, r.second);

  // sharpen: the value comparisons above locate q* to ~sqrt(machine eps);
  // a bracketed root of the derivative pins it to full precision
  auto df = [&](double q) { return detail::gardner_bracket_dq(q, alpha, k, rule); };
  double w = 1e-5;
  for (; w < 0.05; w *= 8.0) {
    const double dlo = std::max(0.0, r.first - w);
    const double dhi = std::min(q_cap, r.first + w);
    const double glo = df(dlo), ghi = df(dhi);
    if (glo < 0.0 && ghi > 0.0) {
      boost::math::tools::eps_tolerance<double> tol(52);
      std::uintmax_t rit = 100;
      const auto root = boost::math::tools::toms748_solve(df, dlo, dhi, glo, ghi, tol, rit);
      const double q_star = 0.5 * (root.first + root.second);
      return {f(q_star), q_star};
    }
  }
  return {r.second, r.first};
}

// ---------------------------------------------------------------------------
// Critical capacity
// ---------------------------------------------------------------------------

// 1 / ((1 + k^2) Phi(k) + k phi(k)), the closed form of the defining integral
inline double critical_capacity(double k) {
  if (!(k >= 0.0)) throw std::domain_error("k must be nonnegative");
  const double big_phi = 1.0 - gauss_tail(k);
  return 1.0 / ((1.0 + k * k) * big_phi + k * gauss_density(k));
}

// Second, independent route: quadrature of (2 pi)^{-1/2} int_{-k}^inf (u+k)^2
// e^{-u^2/2} du after shifting to t = u + k (the integrand is smooth there).
inline double critical_capacity_by_quadrature(double k, int panels = 40) {
  if (!(k >= 0.0)) throw std::domain_error("k must be nonnegative");
  static const LegendreRule gl = build_legendre(24);
  const double hi = k + 45.0;
  const double width = hi / panels;
  double integral = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * width;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double t = mid + 0.5 * width * gl.nodes[i];
      integral += 0.5 * width * gl.weights[i] * t * t * gauss_density(t - k);
    }
  }
  return 1.0 / integral;
}

// ---------------------------------------------------------------------------
// Regularized functional
// ---------------------------------------------------------------------------

// alpha E log H((u sqrt q + k)/sqrt(eps + R - q)) + q/(2(R-q)) + log(R-q)/2
//   - z R/2 + h^2 (R-q)/2,  the max-min bracket of the smoothed model
inline double regularized_bracket(double q, double R, const ModelParams& p,
                                  const GaussianQuadrature& rule = default_quadrature()) {
  if (!(q >= 0.0 && q < R)) throw std::domain_error("need 0 <= q < R");
  if (!(p.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double W = p.eps + R - q;
  const double a = std::sqrt(q / W);
  const double b = p.k / std::sqrt(W);
  const double expect =
      gaussian_expect([&](double u) { return log_gauss_tail(a * u + b); }, rule);
  const double gap = R - q;
  return p.alpha * expect + 0.5 * q / gap + 0.5 * std::log(gap) - 0.5 * p.z * R +
         0.5 * p.h * p.h * gap;
}

// Same bracket after the substitution s = q/(R + eps - q); used by the
// residual system and its tests.
inline double transformed_bracket(double s, double R, const ModelParams& p,
                                  const GaussianQuadrature& rule = default_quadrature()) {
  if (!(s >= 0.0)) throw std::domain_error("s must be nonnegative");
  const double d = R - p.eps * s;
  if (!(d > 0.0)) throw std::domain_error("need R > eps*s");
  const double shift = p.k * std::sqrt(1.0 + s) / std::sqrt(p.eps + R);
  const double rs = std::sqrt(s);
  const double expect =
      gaussian_expect([&](double u) { return log_gauss_tail(rs * u + shift); }, rule);
  return p.alpha * expect + 0.5 * s * (R + p.eps) / d + 0.5 * std::log(d) -
         0.5 * std::log1p(s) - 0.5 * p.z * R + 0.5 * p.h * p.h * d / (1.0 + s);
}

// ---------------------------------------------------------------------------
// Stationarity residuals and the saddle solver
// ---------------------------------------------------------------------------

namespace detail {

inline double residual_f1(double s, double R, const ModelParams& p,
                          const GaussianQuadrature& rule) {
  const double W = p.eps + R;
  const double shift = p.k * std::sqrt(1.0 + s) / std::sqrt(W);
  const double rs = std::sqrt(s);
  const double ea2 = gaussian_expect(
      [&](double u) {
        const double a = tail_ratio(rs * u + shift);
        return a * a;
      },
      rule);
  const double d = R - p.eps * s;
  return -(p.alpha / s) * ea2 + (W * W) / (d * d) - p.h * p.h * W / (s * (s + 1.0));
}

inline double residual_f2(double s, double R, const ModelParams& p,
                          const GaussianQuadrature& rule) {
  const double W = p.eps + R;
  const double d = R - p.eps * s;
  double field_term = 0.0;
  if (p.alpha > 0.0 && p.k > 0.0) {
    const double shift = p.k * std::sqrt(1.0 + s) / std::sqrt(W);
    const double rs = std::sqrt(s);
    const double ea =
        gaussian_expect([&](double u) { return tail_ratio(rs * u + shift); }, rule);
    field_term = p.alpha * p.k * std::sqrt(1.0 + s) / (W * std::sqrt(W)) * ea;
  }
  return field_term - p.eps * s * (s + 1.0) / (d * d) + 1.0 / d + p.h * p.h / (s + 1.0) - p.z;
}

}  // namespace detail

inline SaddleResiduals saddle_residuals(double s, double R, const ModelParams& p,
                                        const GaussianQuadrature& rule = default_quadrature()) {
  if (!(s > 0.0)) throw std::domain_error("s must be positive");
  if (!(R > p.eps * s)) throw std::domain_error("need R > eps*s");
  return {detail::residual_f1(s, R, p, rule), detail::residual_f2(s, R, p, rule)};
}

namespace detail {

// f1(., R) is strictly increasing on (0, R/eps) and runs from -inf to +inf,
// so the inner root always brackets; "pinned" reports the (above-capacity)
// case where the sign change gets pushed onto the domain edge.
inline double inner_s_root(double R, const ModelParams& p, const GaussianQuadrature& rule,
                           int& evals, bool& pinned) {
  const double cap = (R / p.eps) * (1.0 - 1e-9);
  double lo = std::min(1e-8, 0.5 * cap);
  double flo = residual_f1(lo, R, p, rule);
  ++evals;
  while (flo > 0.0 && lo > 1e-280) {
    lo *= 1e-4;
    flo = residual_f1(lo, R, p, rule);
    ++evals;
  }
  if (flo > 0.0) throw non_convergence("inner saddle root: no sign change near s=0");
  double hi = std::min(1.0, 0.5 * cap);
  if (hi <= lo) hi = std::min(lo * 2.0, cap);
  double fhi = residual_f1(hi, R, p, rule);
  ++evals;
  while (fhi <= 0.0) {
    if (hi >= cap * (1.0 - 1e-12)) {
      pinned = true;
      return cap;
    }
    hi = std::min(hi * 4.0, cap);
    fhi = residual_f1(hi, R, p, rule);
    ++evals;
  }
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t it = 120;
  const auto bracket = boost::math::tools::toms748_solve(
      [&](double s) {
        ++evals;
        return residual_f1(s, R, p, rule);
      },
      lo, hi, flo, fhi, tol, it);
  return 0.5 * (bracket.first + bracket.second);
}

}  // namespace detail

// Direct nested max-min of regularized_bracket: maximize over R the inner
// minimum over q.  Slower and less precise than the residual route but fully
// independent of it; also serves as the locator for the h = 0 path.
inline SaddlePoint solve_saddle_by_optimization(const ModelParams& p,
                                                const GaussianQuadrature& rule = default_quadrature(),
                                                int grid = 64) {
  validate_saddle_params(p);
  auto inner = [&](double R) {
    auto f = [&](double q) { return regularized_bracket(q, R, p, rule); };
    const double q_hi = R * (1.0 - 1e-9);
    int best = 0;
    double best_val = f(0.0);
    for (int i = 1; i <= grid; ++i) {
      const double v = f(q_hi * i / grid);
      if (v < best_val) {
        best_val = v;
        best = i;
      }
    }
    const double lo = q_hi * std::max(0, best - 1) / grid;
    const double hi = q_hi * std::min(grid, best + 1) / grid;
    std::uintmax_t it = 100;
    return boost::math::tools::brent_find_minima(f, lo, hi, 38, it);
  };

  // log-spaced outer grid around the 1/z scale
  const double r_lo = 0.02 / p.z, r_hi = 50.0 / p.z;
  int best = 0;
  double best_val = -inner(r_lo).second;
  for (int i = 1; i <= grid; ++i) {
    const double R = r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / grid);
    const double v = -inner(R).second;
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double lo = r_lo * std::pow(r_hi / r_lo, std::max(0, best - 1) / static_cast<double>(grid));
  const double hi =
      r_lo * std::pow(r_hi / r_lo, std::min(grid, best + 1) / static_cast<double>(grid));
  std::uintmax_t it = 100;
  const auto outer = boost::math::tools::brent_find_minima(
      [&](double R) { return -inner(R).second; }, lo, hi, 38, it);

  SaddlePoint sp;
  sp.R = outer.first;
  sp.q = inner(sp.R).first;
  sp.s = sp.q / (sp.R + p.eps - sp.q);
  if (sp.s > 0.0) {
    const auto res = saddle_residuals(sp.s, sp.R, p, rule);
    sp.residual_f1 = res.f1;
    sp.residual_f2 = res.f2;
  }
  sp.converged = true;
  return sp;
}

// Residual-root saddle solver.  Inner coordinate: monotone bracketing of f1
// in s; outer: f2 along the inner solution is strictly decreasing in R (the
// bracket is strictly concave in R), so both stages are plain bracketed
// roots.  h = 0 first locates the saddle by the nested optimization above,
// then sharpens it here to residual tolerance.
inline SaddlePoint solve_saddle(const ModelParams& p,
                                const GaussianQuadrature& rule = default_quadrature(),
                                double residual_tol = 1e-9, int max_iterations = 200) {
  validate_saddle_params(p);

  SaddlePoint sp;
  if (p.alpha == 0.0) {
    // pure Gaussian closed form
    sp.q = p.h * p.h / (p.z * p.z);
    sp.R = sp.q + 1.0 / p.z;
    sp.s = sp.q / (sp.R + p.eps - sp.q);
    if (sp.s > 0.0) {
      const auto res = saddle_residuals(sp.s, sp.R, p, rule);
      sp.residual_f1 = res.f1;
      sp.residual_f2 = res.f2;
    }
    sp.converged = true;
    return sp;
  }

  int evals = 0;
  bool pinned = false;
  auto outer_g = [&](double R) {
    bool pin = false;
    const double s = detail::inner_s_root(R, p, rule, evals, pin);
    pinned = pinned || pin;
    return detail::residual_f2(s, R, p, rule);
  };

  double r_lo = 0.5 / p.z, r_hi = 2.0 / p.z;
  if (p.h == 0.0) {
    // locate first (coarse nested max-min), then polish with the roots; the
    // locator only has to land inside a x1.3 bracket, so a light rule does
    static const GaussianQuadrature locator_rule = build_quadrature(48);
    const SaddlePoint hint = solve_saddle_by_optimization(p, locator_rule, 16);
    r_lo = hint.R / 1.3;
    r_hi = hint.R * 1.3;
  }
  double g_lo = outer_g(r_lo);
  while (g_lo <= 0.0 && r_lo > 1e-12) {
    r_lo *= 0.25;
    g_lo = outer_g(r_lo);
  }
  if (g_lo <= 0.0) throw non_convergence("outer saddle root: no lower bracket in R");
  double g_hi = outer_g(r_hi);
  while (g_hi > 0.0 && r_hi < 1e10) {
    r_hi *= 2.0;
    g_hi = outer_g(r_hi);
  }
  if (g_hi > 0.0) throw non_convergence("outer saddle root: no upper bracket in R");

  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t it = static_cast<std::uintmax_t>(max_iterations);
  const auto bracket = boost::math::tools::toms748_solve(outer_g, r_lo, r_hi, g_lo, g_hi, tol, it);
  sp.R = 0.5 * (bracket.first + bracket.second);

  bool pin_final = false;
  sp.s = detail::inner_s_root(sp.R, p, rule, evals, pin_final);
  sp.q = sp.s * (sp.R + p.eps) / (1.0 + sp.s);
  const auto res = saddle_residuals(sp.s, sp.R, p, rule);
  sp.residual_f1 = res.f1;
  sp.residual_f2 = res.f2;
  sp.iterations = evals;
  sp.boundary_pinned = pinned || pin_final;
  sp.converged = !sp.boundary_pinned &&
                 std::max(std::abs(res.f1), std::abs(res.f2)) <= residual_tol;
  if (!sp.converged && !sp.boundary_pinned)
    throw non_convergence("saddle solver stalled: residuals " + std::to_string(res.f1) + ", " +
                          std::to_string(res.f2));
  return sp;
}

// ---------------------------------------------------------------------------
// Fixed-point identities of the order parameters
// ---------------------------------------------------------------------------

// At the exact saddle: q_tilde = (alpha/U) E A^2, U_tilde = alpha/eps +
// (alpha/U^{3/2}) E (k + sqrt(q) u) A, Delta = alpha/eps - U_tilde + q_tilde,
// and then R - q = 1/(z + Delta), q = (q_tilde + h^2)/(z + Delta)^2.
struct RsIdentities {
  double U = 0.0;
  double q_tilde = 0.0;
  double U_tilde = 0.0;
  double U_tilde_excess = 0.0;  // U_tilde - alpha/eps (finite as eps -> 0)
  double Delta = 0.0;
  double gap_predicted = 0.0;  // 1/(z + Delta), to compare with R - q
  double q_predicted = 0.0;    // (q_tilde + h^2)/(z + Delta)^2
};

inline RsIdentities rs_identities(double q, double R, const ModelParams& p,
                                  const GaussianQuadrature& rule = default_quadrature()) {
  if (!(q >= 0.0 && q < R)) throw std::domain_error("need 0 <= q < R");
  RsIdentities id;
  id.U = R - q + p.eps;
  const double rq = std::sqrt(q);
  const double su = std::sqrt(id.U);
  id.q_tilde = p.alpha / id.U *
               gaussian_expect(
                   [&](double u) {
                     const double a = tail_ratio((rq * u + p.k) / su);
                     return a * a;
                   },
                   rule);
  id.U_tilde_excess = p.alpha / (id.U * su) *
                      gaussian_expect(
                          [&](double u) {
                            return (p.k + rq * u) * tail_ratio((rq * u + p.k) / su);
                          },
                          rule);
  id.U_tilde = p.alpha / p.eps + id.U_tilde_excess;
  id.Delta = id.q_tilde - id.U_tilde_excess;
  id.gap_predicted = 1.0 / (p.z + id.Delta);
  id.q_predicted = (id.q_tilde + p.h * p.h) / ((p.z + id.Delta) * (p.z + id.Delta));
  return id;
}

// ---------------------------------------------------------------------------
// Spherical (hard-constraint) limit
// ---------------------------------------------------------------------------

// min over z of F(alpha, k, 0, z, eps) + z/2; approaches the Gardner value as
// eps -> 0.  The z-bracket widens geometrically until the minimum is
// interior, capped by the z <= eps^{-1/3} validity bound.
inline SphericalValue spherical_value(double alpha, double k, double eps,
                                      const GaussianQuadrature& rule = default_quadrature()) {
  if (!(alpha >= 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in [0, 2)");
  if (!(k >= 0.0)) throw std::invalid_argument("k must be nonnegative");
  if (!(eps > 0.0 && eps <= 0.1)) throw std::invalid_argument("eps must lie in (0, 0.1]");

  const double z_cap = std::pow(eps, -1.0 / 3.0);
  struct Eval {
    double value;
    SaddlePoint sp;
  };
  auto phi = [&](double z) -> Eval {
    ModelParams p{alpha, k, 0.0, z, eps};
    SaddlePoint sp = solve_saddle(p, rule);
    return {regularized_bracket(sp.q, sp.R, p, rule) + 0.5 * z, sp};
  };

  double lo = 0.5, hi = std::min(2.0, z_cap);
  for (int attempt = 0; attempt < 12; ++attempt) {
    std::uintmax_t it = 100;
    const auto m =
        boost::math::tools::brent_find_minima([&](double z) { return phi(z).value; }, lo, hi, 25, it);
    const double span = hi - lo;
    const bool at_lo = m.first - lo < 0.01 * span;
    const bool at_hi = hi - m.first < 0.01 * span;
    if (!at_lo && !at_hi) {
      const Eval e = phi(m.first);
      if (m.first > z_cap * (1.0 + 1e-9))
        throw non_convergence("spherical minimizer violates z <= eps^(-1/3)");
      return {e.value, m.first, e.sp.R, e.sp.q};
    }
    if (at_lo) lo = std::max(lo * 0.25, 1e-6);
    if (at_hi) {
      if (hi >= z_cap * (1.0 - 1e-12))
        throw non_convergence("spherical minimum not bracketed below eps^(-1/3)");
      hi = std::min(hi * 4.0, z_cap);
    }
  }
  throw non_convergence("spherical minimum: bracket expansion exhausted");
}

}  // namespace gardner
