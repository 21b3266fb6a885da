#pragma once
// Gaussian tail functions and quadrature.
//
//   gauss_tail(x)      H(x)  = P(u > x),  u ~ N(0,1)
//   log_gauss_tail(x)  log H(x), stable into the far tail
//   tail_ratio(x)      A(x)  = phi(x)/H(x)   (inverse Mills ratio)
//   tail_ratio_prime   A'(x) = A(x)(A(x) - x)
//
// plus Gauss-Hermite rules rescaled to the standard normal, so that
// sum_i w_i g(u_i) approximates E g(u).

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gardner {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
inline constexpr double log_sqrt_2pi = 0.9189385332046727417803297;

inline double gauss_density(double x) {
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double gauss_tail(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244); }

namespace detail {

// S(x) = sum_{m>=1} (-1)^m (2m-1)!! / x^(2m), truncated at the smallest term.
// H(x) = phi(x)/x * (1 + S(x)) for large x.
inline double tail_series(double x) {
  const double ix2 = 1.0 / (x * x);
  double term = 1.0, sum = 0.0, prev = 1e300;
  for (int m = 1; m < 200; ++m) {
    term *= -(2 * m - 1) * ix2;
    if (std::abs(term) >= prev) break;  // asymptotic tail started growing
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-17 * (1.0 + std::abs(sum))) break;
  }
  return sum;
}

}  // namespace detail

// Crossover at x = 8: the direct log and the asymptotic expansion agree to
// ~1e-14 there, and erfc keeps full relative accuracy below it.
inline double log_gauss_tail(double x) {
  if (x > 8.0)
    return -0.5 * x * x - std::log(x) - log_sqrt_2pi + std::log1p(detail::tail_series(x));
  if (x < -1.0) return std::log1p(-gauss_tail(-x));
  return std::log(gauss_tail(x));
}

inline double tail_ratio(double x) {
  if (x > 20.0) return x / (1.0 + detail::tail_series(x));
  return gauss_density(x) / gauss_tail(x);
}

inline double tail_ratio_prime(double x) {
  const double a = tail_ratio(x);
  return a * (a - x);
}

// Nodes/weights with sum_i w_i g(u_i) ~ E g(u) for u ~ N(0,1).  Nodes are
// ascending and exactly antisymmetric; weights sum to 1 by orthogonality of
// the Jacobi-matrix eigenvectors.
struct GaussianQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order() const { return static_cast<int>(nodes.size()); }
};

// Golub-Welsch on the Hermite Jacobi matrix (weight e^{-x^2}), then the
// substitution u = sqrt(2) x to reach the standard normal.
inline GaussianQuadrature build_quadrature(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    const double b = std::sqrt(0.5 * i);
    jac(i, i - 1) = b;
    jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  if (es.info() != Eigen::Success) throw std::runtime_error("quadrature eigensolve failed");

  GaussianQuadrature rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const double sqrt2 = std::sqrt(2.0);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = sqrt2 * es.eigenvalues()(i);  // ascending
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
  }
  // enforce the exact +-u symmetry the eigensolver only delivers to rounding
  for (int i = 0, j = order - 1; i < j; ++i, --j) {
    const double u = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -u;
    rule.nodes[j] = u;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

inline const GaussianQuadrature& default_quadrature() {
  static const GaussianQuadrature rule = build_quadrature(200);
  return rule;
}

template <class F>
double gaussian_expect(F&& g, const GaussianQuadrature& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * g(rule.nodes[i]);
  return acc;
}

template <class F>
double gaussian_expect(F&& g) {
  return gaussian_expect(static_cast<F&&>(g), default_quadrature());
}

// Gauss-Legendre on [-1,1] (weights sum to 2); same Golub-Welsch machinery.
struct LegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline LegendreRule build_legendre(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    jac(i, i - 1) = b;
    jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  if (es.info() != Eigen::Success) throw std::runtime_error("quadrature eigensolve failed");
  LegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = 2.0 * v0 * v0;
  }
  return rule;
}

}  // namespace gardner
