#pragma once
// Finite-N sampling of the smoothed-constraint Gibbs measure.  The auxiliary
// representation (J, x) makes both conditionals exactly sampleable: x | J is a
// product of lower-truncated normals, and J | x is a multivariate normal whose
// precision matrix z I + (N eps)^{-1} Xi^T Xi does not depend on x, so its
// Cholesky factor is computed once per instance and every sweep costs two
// triangular solves.  No step-size tuning, no discretization bias; the energy
// gradient is still shipped for validation.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <gardner/estimation.hpp>
#include <gardner/patterns.hpp>
#include <gardner/replica.hpp>
#include <gardner/rng.hpp>
#include <gardner/specfn.hpp>

namespace gardner {

struct DisorderInstance {
  PatternSet patterns;
  Eigen::VectorXd field;  // the quenched h_i
  ModelParams params;     // params.alpha holds the realized ratio p/N
  Eigen::LLT<Eigen::MatrixXd> precision_factor;  // of z I + (N eps)^{-1} Xi^T Xi
  double overlap_norm = 0.0;          // power-iteration estimate of ||X_N||
  bool overlap_norm_in_bound = true;  // ||X_N|| <= (sqrt(p/N)+2)^2; diagnostic, never enforced
  std::uint64_t seed = 0;

  int p() const { return patterns.p; }
  int N() const { return patterns.N; }
};

// Pattern count p = round(alpha N); alpha small enough to round to p = 0 is
// allowed and gives the exactly solvable pure-Gaussian instance.  Patterns,
// field, and chains draw from disjoint labeled streams of `seed`.
inline DisorderInstance make_instance(int N, double alpha, const ModelParams& params,
                                      std::uint64_t seed,
                                      PatternMode mode = PatternMode::binary) {
  if (N < 2) throw std::invalid_argument("N must be at least 2");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
  if (!(params.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(params.z > 0.0)) throw std::invalid_argument("z must be positive");
  const int p = static_cast<int>(std::lround(alpha * N));

  DisorderInstance inst;
  inst.patterns = make_patterns(p, N, seed, mode);
  inst.params = params;
  inst.params.alpha = static_cast<double>(p) / N;  // finite-size ratio, exact
  inst.seed = seed;
  inst.field.resize(N);
  Rng field_rng(derive_stream(seed, "field", 0));
  for (int i = 0; i < N; ++i) inst.field[i] = field_rng.normal();

  Eigen::MatrixXd precision = params.z * Eigen::MatrixXd::Identity(N, N);
  if (p > 0)
    precision.noalias() +=
        inst.patterns.xi.transpose() * inst.patterns.xi / (N * params.eps);
  inst.precision_factor.compute(precision);
  if (inst.precision_factor.info() != Eigen::Success)
    throw std::runtime_error("precision factorization failed (invariant violation)");

  if (p > 0) {
    const Eigen::MatrixXd overlap = inst.patterns.xi * inst.patterns.xi.transpose() / N;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(p).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      v = overlap * v;
      lambda = v.norm();
      if (lambda == 0.0) break;
      v /= lambda;
    }
    inst.overlap_norm = lambda;
    const double root_alpha = std::sqrt(static_cast<double>(p) / N);
    inst.overlap_norm_in_bound = lambda <= (root_alpha + 2.0) * (root_alpha + 2.0);
  }
  return inst;
}

// -Sum_mu log H((k - t_mu)/sqrt(eps)) + h (h,J) + (z/2)(J,J) with
// t_mu = N^{-1/2}(xi_mu, J); finite for every finite J.
inline double energy(const Eigen::VectorXd& J, const DisorderInstance& inst) {
  if (J.size() != inst.N()) throw std::invalid_argument("J has wrong length");
  const ModelParams& mp = inst.params;
  const double root_eps = std::sqrt(mp.eps);
  double e = mp.h * inst.field.dot(J) + 0.5 * mp.z * J.squaredNorm();
  if (inst.p() > 0) {
    const Eigen::VectorXd t = inst.patterns.xi * J / std::sqrt(static_cast<double>(inst.N()));
    for (int mu = 0; mu < inst.p(); ++mu) e -= log_gauss_tail((mp.k - t[mu]) / root_eps);
  }
  return e;
}

inline Eigen::VectorXd grad_energy(const Eigen::VectorXd& J, const DisorderInstance& inst) {
  if (J.size() != inst.N()) throw std::invalid_argument("J has wrong length");
  const ModelParams& mp = inst.params;
  Eigen::VectorXd g = mp.h * inst.field + mp.z * J;
  if (inst.p() > 0) {
    const double root_eps = std::sqrt(mp.eps);
    const Eigen::VectorXd t = inst.patterns.xi * J / std::sqrt(static_cast<double>(inst.N()));
    Eigen::VectorXd a(inst.p());
    for (int mu = 0; mu < inst.p(); ++mu) a[mu] = tail_ratio((mp.k - t[mu]) / root_eps);
    // chain rule through (k - t_mu)/sqrt(eps) flips the sign of the A-term
    g.noalias() -= inst.patterns.xi.transpose() * a / std::sqrt(inst.N() * mp.eps);
  }
  return g;
}

// Exact draw from N(mean, sd^2) conditioned on (lower, inf).  Bulk cuts use a
// plain resample loop; standardized cuts above 0.4 switch to the shifted
// exponential proposal with rate (a + sqrt(a^2+4))/2, which keeps the
// acceptance rate high out to a ~ 40 and beyond.
inline double truncated_normal_sample(double mean, double sd, double lower, Rng& rng) {
  if (!(sd > 0.0)) throw std::invalid_argument("sd must be positive");
  const double a = (lower - mean) / sd;
  double xs;
  if (a <= 0.4) {
    do {
      xs = rng.normal();
    } while (xs <= a);
  } else {
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      xs = a + rng.exponential() / rate;
      const double d = xs - rate;
      if (xs > a && rng.uniform() < std::exp(-0.5 * d * d)) break;
    }
  }
  const double r = mean + sd * xs;
  // rounding of mean + sd*xs may land exactly on the cut; keep the bound strict
  return r > lower ? r : std::nextafter(lower, std::numeric_limits<double>::infinity());
}

struct ChainState {
  Eigen::VectorXd J;
  Eigen::VectorXd x;  // auxiliary overlaps, each strictly above the margin
  long sweep_count = 0;
  std::uint64_t stream_id = 0;
};

// Fresh chain: J = 0 with x drawn from its conditional at that J, so every
// invariant holds from the first sweep.
inline ChainState make_chain(const DisorderInstance& inst, std::uint64_t stream_id, Rng& rng) {
  ChainState st;
  st.stream_id = stream_id;
  st.J = Eigen::VectorXd::Zero(inst.N());
  st.x.resize(inst.p());
  const double root_eps = std::sqrt(inst.params.eps);
  for (int mu = 0; mu < inst.p(); ++mu)
    st.x[mu] = truncated_normal_sample(0.0, root_eps, inst.params.k, rng);
  return st;
}

// One full alternation: x | J (truncated normals around the pattern overlaps)
// then J | x (normal with the cached precision factor; mean solves
// P m = (eps sqrt N)^{-1} Xi^T x - h h).  Each half-step samples its exact
// conditional, so the joint measure is invariant and the J-marginal is the
// Gibbs measure of `energy`.
inline ChainState blocked_sweep(ChainState state, const DisorderInstance& inst, Rng& rng) {
  const ModelParams& mp = inst.params;
  const int N = inst.N(), p = inst.p();
  const double root_N = std::sqrt(static_cast<double>(N));
  const double root_eps = std::sqrt(mp.eps);

  if (p > 0) {
    const Eigen::VectorXd t = inst.patterns.xi * state.J / root_N;
    for (int mu = 0; mu < p; ++mu)
      state.x[mu] = truncated_normal_sample(t[mu], root_eps, mp.k, rng);
  }

  Eigen::VectorXd rhs = -mp.h * inst.field;
  if (p > 0) rhs.noalias() += inst.patterns.xi.transpose() * state.x / (mp.eps * root_N);
  Eigen::VectorXd g(N);
  for (int i = 0; i < N; ++i) g[i] = rng.normal();
  state.J = inst.precision_factor.solve(rhs) + inst.precision_factor.matrixU().solve(g);

  if (!state.J.allFinite() || !state.x.allFinite())
    throw std::runtime_error("chain fault: non-finite draw (sweep " +
                             std::to_string(state.sweep_count) + ", stream " +
                             std::to_string(state.stream_id) + ")");
  ++state.sweep_count;
  return state;
}

struct OrderParameterEstimate {
  Estimate R_N;                  // (1/N) Sum_i <J_i^2>
  Estimate q_N;                  // (1/N) Sum_i <J_i>^2, cross-chain unbiased
  Estimate tilde_U;              // (eps^2 N)^{-1} Sum_mu <(t_mu - x_mu)^2>
  Estimate tilde_q;              // (eps^2 N)^{-1} Sum_mu <t_mu - x_mu>^2
  Estimate factorization_stat;   // <(N^{-1} Sum_i Jdot_i^(1) Jdot_i^(2))^2>
  long n_sweeps = 0;
  int n_chains = 0;
  long burn_in_used = 0;          // largest effective burn-in across chains
  double max_coupling_scaled = 0.0;  // max over recorded sweeps of max_i |J_i| / sqrt(N); diagnostic only
};

namespace detail {

// Discard `burn_in` sweeps, then keep discarding in 50-sweep windows until two
// consecutive energy-window means agree within one window standard error
// (capped at 20 extra windows).
inline ChainState equilibrate(ChainState st, const DisorderInstance& inst, Rng& rng,
                              long burn_in, long& sweeps_used) {
  for (long t = 0; t < burn_in; ++t) st = blocked_sweep(std::move(st), inst, rng);
  sweeps_used = burn_in;
  constexpr int window = 50;
  double prev_mean = 0.0;
  bool have_prev = false;
  for (int w = 0; w < 20; ++w) {
    double s = 0.0, s2 = 0.0;
    for (int t = 0; t < window; ++t) {
      st = blocked_sweep(std::move(st), inst, rng);
      const double e = energy(st.J, inst);
      s += e;
      s2 += e * e;
    }
    sweeps_used += window;
    const double m = s / window;
    const double se = std::sqrt(std::max(0.0, s2 / window - m * m) / window);
    if (have_prev && std::abs(m - prev_mean) <= se) break;
    prev_mean = m;
    have_prev = true;
  }
  return st;
}

}  // namespace detail

// Runs n_chains independent chains (streams "chain"/0..n-1 of the instance
// seed) and estimates the order parameters from n_sweeps - burn_in recorded
// sweeps per chain.  Means-squared quantities (q_N, tilde_q) use same-sweep
// products across distinct chains, which are unbiased at every sweep; the
// factorization statistic pairs chain differences (4 chains per group), which
// centers the draws exactly.  Error bars come from batch means of the
// per-sweep series.
inline OrderParameterEstimate estimate_order_parameters(const DisorderInstance& inst,
                                                        int n_chains, long n_sweeps,
                                                        long burn_in) {
  if (n_chains < 2) throw std::invalid_argument("need at least 2 chains for unbiased q_N");
  if (burn_in < 0 || n_sweeps <= burn_in)
    throw std::invalid_argument("need n_sweeps > burn_in >= 0");
  const int N = inst.N();
  const long n_rec = n_sweeps - burn_in;

  std::vector<Rng> rngs;
  std::vector<ChainState> states;
  rngs.reserve(n_chains);
  states.reserve(n_chains);
  long burn_used = 0;
  for (int c = 0; c < n_chains; ++c) {
    const std::uint64_t sid = derive_stream(inst.seed, "chain", static_cast<std::uint64_t>(c));
    rngs.emplace_back(sid);
    ChainState st = make_chain(inst, sid, rngs.back());
    long used = 0;
    st = detail::equilibrate(std::move(st), inst, rngs.back(), burn_in, used);
    burn_used = std::max(burn_used, used);
    states.push_back(std::move(st));
  }

  detail::BatchMeans r_acc, q_acc, u_acc, qt_acc, f_acc;
  const double inv_eps2N = 1.0 / (inst.params.eps * inst.params.eps * N);
  const double root_N = std::sqrt(static_cast<double>(N));
  std::vector<Eigen::VectorXd> tm(n_chains);
  double max_scaled = 0.0;
  for (long t = 0; t < n_rec; ++t) {
    for (int c = 0; c < n_chains; ++c)
      states[c] = blocked_sweep(std::move(states[c]), inst, rngs[c]);

    double r = 0.0;
    for (int c = 0; c < n_chains; ++c) {
      r += states[c].J.squaredNorm();
      max_scaled = std::max(max_scaled, states[c].J.cwiseAbs().maxCoeff() / root_N);
    }
    r_acc.add(r / (static_cast<double>(n_chains) * N));

    double u = 0.0;
    for (int c = 0; c < n_chains; ++c) {
      tm[c] = inst.patterns.xi * states[c].J / root_N - states[c].x;
      u += tm[c].squaredNorm();
    }
    u_acc.add(u * inv_eps2N / n_chains);

    double qp = 0.0, qtp = 0.0;
    int pairs = 0;
    for (int a = 0; a < n_chains; ++a)
      for (int b = a + 1; b < n_chains; ++b) {
        qp += states[a].J.dot(states[b].J);
        qtp += tm[a].dot(tm[b]);
        ++pairs;
      }
    q_acc.add(qp / (static_cast<double>(pairs) * N));
    qt_acc.add(qtp * inv_eps2N / pairs);

    if (n_chains >= 4) {
      double f = 0.0;
      int groups = 0;
      for (int g = 0; 4 * g + 3 < n_chains; ++g) {
        const double ov = (states[4 * g].J - states[4 * g + 1].J)
                              .dot(states[4 * g + 2].J - states[4 * g + 3].J) /
                          (2.0 * N);
        f += ov * ov;
        ++groups;
      }
      f_acc.add(f / groups);
    }
  }

  OrderParameterEstimate est;
  est.R_N = r_acc.result();
  est.q_N = q_acc.result();
  est.tilde_U = u_acc.result();
  est.tilde_q = qt_acc.result();
  if (n_chains >= 4) est.factorization_stat = f_acc.result();
  est.n_sweeps = n_sweeps;
  est.n_chains = n_chains;
  est.burn_in_used = burn_used;
  est.max_coupling_scaled = max_scaled;
  return est;
}

// <(N^{-1} Sum_i Jdot_i^(1) Jdot_i^(2))^2>: needs two replica pairs, i.e. four
// independent chains, for an exactly centered unbiased product.
inline Estimate factorization_statistic(const DisorderInstance& inst, int n_chains,
                                        long n_sweeps, long burn_in) {
  if (n_chains < 4)
    throw std::invalid_argument("factorization statistic needs at least 4 chains");
  return estimate_order_parameters(inst, n_chains, n_sweeps, burn_in).factorization_stat;
}

struct ConsistencyRow {
  std::string name;
  double measured = 0.0;
  double predicted = 0.0;
  double tolerance = 0.0;  // three combined standard errors
  bool ok = true;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  bool all_ok = true;
};

// Tabulates the fixed-point identities linking the sampled order parameters
// to the replica saddle: the within-simulation closures
// q = (q~ + h^2)/(z + D)^2 and R - q = 1/(z + D) with D = alpha/eps - U~ + q~,
// the closed-form predictions for q~ and U~ at the saddle, and the direct
// saddle comparison.  Rows are flagged beyond three combined standard errors.
inline ConsistencyReport rs_consistency_report(const OrderParameterEstimate& est,
                                               const SaddlePoint& sp, const ModelParams& p,
                                               const GaussianQuadrature& rule = default_quadrature()) {
  if (!sp.converged) throw std::invalid_argument("need a converged saddle point");
  ConsistencyReport rep;
  auto add = [&](std::string name, double measured, double predicted, double tol) {
    const bool ok = std::isfinite(measured) && std::isfinite(predicted) &&
                    std::abs(measured - predicted) <= tol;
    rep.all_ok = rep.all_ok && ok;
    rep.rows.push_back({std::move(name), measured, predicted, tol, ok});
  };

  const double qt = est.tilde_q.value, ut = est.tilde_U.value;
  const double s_qt = est.tilde_q.std_error, s_ut = est.tilde_U.std_error;
  const double delta = p.alpha / p.eps - ut + qt;
  const double zd = p.z + delta;
  const double num = qt + p.h * p.h;

  const double q_pred = num / (zd * zd);
  const double q_pred_err =
      std::hypot((1.0 - 2.0 * num / zd) / (zd * zd) * s_qt, 2.0 * num / (zd * zd * zd) * s_ut);
  add("q_N = (q~+h^2)/(z+D)^2", est.q_N.value, q_pred,
      3.0 * std::hypot(est.q_N.std_error, q_pred_err));

  const double gap_pred_err = std::hypot(s_qt, s_ut) / (zd * zd);
  add("R_N - q_N = 1/(z+D)", est.R_N.value - est.q_N.value, 1.0 / zd,
      3.0 * std::hypot(std::hypot(est.R_N.std_error, est.q_N.std_error), gap_pred_err));

  const auto id = rs_identities(sp.q, sp.R, p, rule);
  add("q~ vs closed form at saddle", qt, id.q_tilde, 3.0 * s_qt);
  add("U~ vs closed form at saddle", ut, id.U_tilde, 3.0 * s_ut);
  add("q_N vs saddle q*", est.q_N.value, sp.q, 3.0 * est.q_N.std_error);
  add("R_N vs saddle R*", est.R_N.value, sp.R, 3.0 * est.R_N.std_error);
  return rep;
}

}  // namespace gardner
