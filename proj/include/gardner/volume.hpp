#pragma once
// Log fractional volume of the sphere region satisfying all pattern
// constraints, estimated as a telescoping sum of per-constraint log acceptance
// probabilities.  Each acceptance is measured by a geodesic hit-and-run walk:
// from the current feasible point, pick a uniform tangent direction, intersect
// the resulting great circle with every constraint arc, and resample uniformly
// on the feasible arcs.  Exact on the circle (N=2), where closed-form arc
// intersection provides the oracle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <gardner/estimation.hpp>
#include <gardner/patterns.hpp>
#include <gardner/rng.hpp>

namespace gardner {

struct WalkConfig {
  int steps_between_samples = 10;
  int samples_per_level = 200;
  int warmup_steps = 100;
  double arc_tolerance = 1e-12;  // radians
};

// Walk lengths scale with the dimension; these defaults hold the sampling
// error below the telescoping tolerance for the sizes exercised here.
inline WalkConfig default_walk_config(int N) {
  return WalkConfig{5 * N, 200, 50 * N, 1e-12};
}

inline void validate_walk_config(const WalkConfig& cfg) {
  if (cfg.steps_between_samples < 1 || cfg.samples_per_level < 1 || cfg.warmup_steps < 1)
    throw std::invalid_argument("walk lengths must be positive");
  if (!(cfg.arc_tolerance > 0.0) || cfg.arc_tolerance > 1e-9)
    throw std::invalid_argument("arc tolerance must be in (0, 1e-9]");
}

struct VolumeEstimate {
  std::vector<double> level_log_acceptance;  // one entry per measured level, each <= 0;
                                             // a trailing -inf marks a level found empty
  double total = 0.0;                        // (1/N) max(sum of level terms, -M*N)
  bool clipped = false;                      // true iff the unclipped sum fell below -M*N
  double M = 10.0;
  double std_error = 0.0;
  int N = 0;
  int p = 0;
  bool low_samples = false;  // fewer than 100 samples per level (soft warning)
};

inline Eigen::VectorXd random_sphere_point(int N, Rng& rng) {
  Eigen::VectorXd g(N);
  double norm = 0.0;
  do {
    for (int i = 0; i < N; ++i) g[i] = rng.normal();
    norm = g.norm();
  } while (norm < 1e-12);
  return g * (std::sqrt(static_cast<double>(N)) / norm);
}

namespace detail {

// One hit-and-run move on the sphere of radius sqrt(N), restricted to the
// first m constraints at the given margin.  `t` must hold the current margins
// xi.topRows(m) * J / sqrt(N) and is updated alongside J.  The current point
// is assumed feasible, so theta = 0 lies in every constraint arc and the
// feasible set of angles is nonempty by construction.
inline void hit_and_run_inplace(Eigen::VectorXd& J, Eigen::VectorXd& t,
                                const Eigen::MatrixXd& xi, int m, double margin,
                                double arc_tol, Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925287;
  const int N = static_cast<int>(J.size());
  const double root_N = std::sqrt(static_cast<double>(N));

  Eigen::VectorXd e(N);
  double norm = 0.0;
  do {
    for (int i = 0; i < N; ++i) e[i] = rng.normal();
    e -= (e.dot(J) / static_cast<double>(N)) * J;
    norm = e.norm();
  } while (norm < 1e-12);
  e /= norm;

  Eigen::VectorXd b;
  if (m > 0) b = xi.topRows(m) * e;

  // Constraint mu restricts the angle to the closed arc |theta - psi| <= w on
  // the great circle J cos(theta) + sqrt(N) e sin(theta).  Since theta = 0 is
  // feasible, |psi| <= w, and the complement gap (psi + w, psi - w + 2 pi) is
  // a plain subinterval of [0, 2 pi] that excludes 0.
  std::vector<std::pair<double, double>> gaps;
  for (int mu = 0; mu < m; ++mu) {
    const double a = t[mu];
    const double r = std::hypot(a, b[mu]);
    if (r < 1e-300) continue;  // constraint constant on this circle; feasible input keeps it
    const double c = margin / r;
    if (c <= -1.0) continue;  // whole circle feasible
    const double w = std::acos(std::min(c, 1.0));
    double psi = std::atan2(b[mu], a);
    psi = std::clamp(psi, -w, w);  // rounding can push the current point just outside
    gaps.emplace_back(psi + w, psi - w + two_pi);
  }

  double theta;
  if (gaps.empty()) {
    theta = two_pi * rng.uniform();
  } else {
    std::sort(gaps.begin(), gaps.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& g : gaps) {
      if (g.second <= g.first) continue;  // zero-width gap
      if (!merged.empty() && g.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, g.second);
      else
        merged.push_back(g);
    }
    double free_len = two_pi;
    for (const auto& g : merged) free_len -= g.second - g.first;
    if (!(free_len >= 0.0))
      throw std::runtime_error("empty arc intersection (invariant violation)");
    if (free_len <= arc_tol) return;  // boundary-pinned point: only theta = 0 remains

    double u = free_len * rng.uniform();
    double prev = 0.0;
    theta = 0.0;
    bool placed = false;
    for (const auto& g : merged) {
      const double seg = g.first - prev;
      if (u < seg) {
        theta = prev + u;
        placed = true;
        break;
      }
      u -= seg;
      prev = g.second;
    }
    if (!placed) theta = prev + u;
  }

  const double ct = std::cos(theta), st = std::sin(theta);
  J = ct * J + (root_N * st) * e;
  const double fix = root_N / J.norm();  // counter slow drift off the sphere
  J *= fix;
  if (m > 0) t = fix * (ct * t + st * b);
}

inline void check_feasible_start(const Eigen::VectorXd& J, const PatternSet& patterns,
                                 int m, double margin) {
  const int N = patterns.N;
  if (J.size() != N) throw std::invalid_argument("point has wrong dimension");
  if (std::abs(J.squaredNorm() - N) > 1e-6 * N)
    throw std::invalid_argument("point is not on the sphere of radius sqrt(N)");
  if (m < 0 || m > patterns.p) throw std::invalid_argument("bad constraint count");
  const double slack = 1e-9 * std::sqrt(static_cast<double>(N));
  for (int mu = 0; mu < m; ++mu)
    if (patterns.xi.row(mu).dot(J) / std::sqrt(static_cast<double>(N)) < margin - slack)
      throw std::invalid_argument("start point violates an active constraint");
}

}  // namespace detail

// Single public step: uniform resampling on the feasible arcs of a random
// great circle through J, restricted to the first m pattern constraints.
inline Eigen::VectorXd geodesic_hit_and_run_step(const Eigen::VectorXd& J,
                                                 const PatternSet& patterns, int m,
                                                 double margin, double arc_tolerance,
                                                 Rng& rng) {
  detail::check_feasible_start(J, patterns, m, margin);
  Eigen::VectorXd point = J;
  Eigen::VectorXd t;
  if (m > 0)
    t = patterns.xi.topRows(m) * point / std::sqrt(static_cast<double>(patterns.N));
  detail::hit_and_run_inplace(point, t, patterns.xi, m, margin, arc_tolerance, rng);
  return point;
}

struct LevelAcceptance {
  double p_hat = 0.0;
  double std_error = 0.0;
  bool zero_hits = false;            // no accepted sample even after the retry
  Eigen::VectorXd next_start;        // last sample satisfying the new constraint
  bool has_next_start = false;
  long samples_used = 0;
};

// Fraction of decorrelated walk samples of the (level-1)-constraint body that
// also satisfy constraint `level`.  The walk starts from `start` (required
// feasible for the first level-1 constraints; omitted only for level 1, where
// any sphere point works).  A level with zero hits retries once with tripled
// walk length and sample count before reporting zero.
inline LevelAcceptance level_acceptance(const PatternSet& patterns, double margin,
                                        int level, const WalkConfig& cfg, Rng& rng,
                                        const Eigen::VectorXd* start = nullptr) {
  validate_walk_config(cfg);
  if (level < 1 || level > patterns.p) throw std::invalid_argument("bad level index");
  const int m = level - 1;
  const int N = patterns.N;
  const double root_N = std::sqrt(static_cast<double>(N));

  Eigen::VectorXd J;
  if (start) {
    detail::check_feasible_start(*start, patterns, m, margin);
    J = *start;
  } else if (m == 0) {
    J = random_sphere_point(N, rng);
  } else {
    throw std::invalid_argument("levels beyond the first need a feasible start point");
  }
  Eigen::VectorXd t;
  if (m > 0) t = patterns.xi.topRows(m) * J / root_N;

  for (int s = 0; s < cfg.warmup_steps; ++s)
    detail::hit_and_run_inplace(J, t, patterns.xi, m, margin, cfg.arc_tolerance, rng);

  LevelAcceptance res;
  auto run_pass = [&](long samples, int steps) {
    detail::BatchMeans bm(50);
    long hits = 0;
    for (long i = 0; i < samples; ++i) {
      for (int s = 0; s < steps; ++s)
        detail::hit_and_run_inplace(J, t, patterns.xi, m, margin, cfg.arc_tolerance, rng);
      const bool accept = patterns.xi.row(m).dot(J) / root_N >= margin;
      bm.add(accept ? 1.0 : 0.0);
      if (accept) {
        res.next_start = J;
        res.has_next_start = true;
        ++hits;
      }
    }
    res.samples_used += samples;
    const Estimate e = bm.result();
    res.p_hat = e.value;
    res.std_error = e.std_error;
    return hits;
  };

  long hits = run_pass(cfg.samples_per_level, cfg.steps_between_samples);
  if (hits == 0)
    hits = run_pass(3L * cfg.samples_per_level, 3 * cfg.steps_between_samples);
  res.zero_hits = hits == 0;
  return res;
}

// Telescoping estimate of (1/N) log Theta: constraints are added one at a
// time, each level's acceptance is measured in the previous body, and the walk
// for the next level starts from an accepted sample.  A level found empty
// clips the whole estimate to the floor -M (per site).
inline VolumeEstimate estimate_log_theta(const PatternSet& patterns, double margin,
                                         double M, const WalkConfig& cfg, Rng& rng) {
  validate_walk_config(cfg);
  if (!(M > 0.0)) throw std::invalid_argument("clip constant M must be positive");

  VolumeEstimate ve;
  ve.M = M;
  ve.N = patterns.N;
  ve.p = patterns.p;
  ve.low_samples = cfg.samples_per_level < 100;

  double sum = 0.0, var = 0.0;
  bool empty_level = false;
  Eigen::VectorXd cur;
  for (int level = 1; level <= patterns.p; ++level) {
    const LevelAcceptance res =
        level_acceptance(patterns, margin, level, cfg, rng, level == 1 ? nullptr : &cur);
    if (res.zero_hits) {
      ve.level_log_acceptance.push_back(-std::numeric_limits<double>::infinity());
      empty_level = true;
      break;
    }
    const double term = std::log(res.p_hat);
    ve.level_log_acceptance.push_back(term);
    sum += term;
    var += (res.std_error / res.p_hat) * (res.std_error / res.p_hat);
    cur = res.next_start;
  }

  if (empty_level || sum < -M * patterns.N) {
    ve.total = -M;
    ve.clipped = true;
  } else {
    ve.total = sum / patterns.N;
    ve.clipped = false;
  }
  ve.std_error = std::sqrt(var) / patterns.N;
  return ve;
}

// Exact feasible fraction of the circle of radius sqrt(2): every constraint
// carves one arc; the complement gaps are merged on [0, 2 pi] and subtracted.
inline double exact_theta_2d(const PatternSet& patterns, double margin) {
  constexpr double two_pi = 6.283185307179586476925287;
  if (patterns.N != 2) throw std::domain_error("exact arc intersection needs N = 2");

  std::vector<std::pair<double, double>> gaps;
  for (int mu = 0; mu < patterns.p; ++mu) {
    const double x = patterns.xi(mu, 0), y = patterns.xi(mu, 1);
    const double r = std::hypot(x, y);
    if (r < 1e-300) {
      if (margin > 0.0) return 0.0;  // 0 >= margin fails everywhere
      continue;
    }
    const double c = margin / r;
    if (c > 1.0) return 0.0;   // constraint nowhere satisfiable
    if (c <= -1.0) continue;   // constraint everywhere satisfied
    const double w = std::acos(std::max(c, -1.0));
    const double psi = std::atan2(y, x);
    double lo = psi + w;  // gap is the complement arc, width 2 pi - 2 w
    lo = std::fmod(lo, two_pi);
    if (lo < 0) lo += two_pi;
    const double hi = lo + (two_pi - 2 * w);
    if (hi <= two_pi) {
      gaps.emplace_back(lo, hi);
    } else {
      gaps.emplace_back(lo, two_pi);
      gaps.emplace_back(0.0, hi - two_pi);
    }
  }
  if (gaps.empty()) return 1.0;

  std::sort(gaps.begin(), gaps.end());
  double covered = 0.0, reach = 0.0;
  for (const auto& g : gaps) {
    if (g.second <= reach) continue;
    covered += g.second - std::max(g.first, reach);
    reach = g.second;
  }
  const double free_len = two_pi - covered;
  // endpoint rounding can leave a sliver where the true intersection is a
  // measure-zero point set (e.g. a pattern and its negation at zero margin)
  if (free_len <= 1e-12) return 0.0;
  return free_len / two_pi;
}

// Probability that p half-spaces through the origin in general position have a
// nonempty common intersection: 2^{1-p} sum_{i<N} C(p-1, i) (classical
// function-counting value; equals 1 for p <= N).
inline double annealed_reference(int N, int p) {
  if (N < 1 || p < 1) throw std::invalid_argument("need N >= 1 and p >= 1");
  double sum = 0.0, binom = 1.0;  // C(p-1, 0)
  const int top = std::min(N - 1, p - 1);
  for (int i = 0; i <= top; ++i) {
    sum += binom;
    binom *= static_cast<double>(p - 1 - i) / (i + 1);
  }
  return std::ldexp(sum, 1 - p);
}

}  // namespace gardner
