#pragma once
// Experiment orchestration: disorder averages over seeded instances, mixed
// theory/simulation tables, and structured CSV/JSON emission.  Every
// stochastic scalar in a result is a pure function of the spec (instance
// streams are derived, never split), so reruns reproduce tables bit for bit
// at any worker count.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include <gardner/gibbs.hpp>
#include <gardner/replica.hpp>
#include <gardner/volume.hpp>

namespace gardner {

inline constexpr const char* artifact_version = "0.1.0";

// error taxonomy mirrored by the CLI exit codes (2 / 3 / 4)
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command {
  capacity,
  free_energy,
  saddle,
  simulate_volume,
  simulate_gibbs,
  factorization,
  consistency,
};

inline const char* command_name(Command c) {
  switch (c) {
    case Command::capacity: return "capacity";
    case Command::free_energy: return "free-energy";
    case Command::saddle: return "saddle";
    case Command::simulate_volume: return "simulate-volume";
    case Command::simulate_gibbs: return "simulate-gibbs";
    case Command::factorization: return "factorization";
    case Command::consistency: return "consistency";
  }
  return "?";
}

enum class Format { csv, json };

inline const char* format_name(Format f) { return f == Format::csv ? "csv" : "json"; }

struct ExperimentSpec {
  Command command = Command::capacity;
  ModelParams params;
  std::vector<int> N_list;
  int n_instances = 30;
  std::uint64_t seed = 1;
  double M = 10.0;
  std::string output_path;  // empty = stdout
  Format format = Format::csv;
  int workers = 1;
  // command-specific knobs (echoed only where meaningful)
  std::vector<double> k_grid;      // capacity
  std::vector<double> alpha_grid;  // free-energy
  std::vector<double> eps_list;    // free-energy
  int chains = 4;                  // gibbs-type commands
  long sweeps = 2000;
  long burn_in = 500;
  int samples = 0;  // volume walk overrides; 0 keeps default_walk_config(N)
  int steps = 0;
};

// All cells are doubles (flags as 0/1); a nonempty label_column prepends one
// string cell per row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string label_column;
  std::vector<std::string> row_labels;
};

struct ResultRecord {
  ExperimentSpec spec;
  Table table;
  std::map<std::string, std::string> stream_map;  // rng stream label -> derivation
  std::map<std::string, double> extra;            // scalar side results (e.g. fitted slope)
  double wallclock_seconds = 0.0;
  std::string rng_name = rng_algorithm;
  std::string version = artifact_version;
};

// shortest round-trip decimal representation
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Work-stealing loop over [0, n); results must be written by index so that
// aggregation is independent of scheduling.
inline void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> faults(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i; (i = next.fetch_add(1)) < n;) body(i);
      } catch (...) {
        faults[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : faults)
    if (e) std::rethrow_exception(e);
}

// root seed for one disorder instance of one system size
inline std::uint64_t instance_seed(std::uint64_t seed, int N, int index) {
  return derive_stream(derive_stream(seed, "size", static_cast<std::uint64_t>(N)),
                       "instance", static_cast<std::uint64_t>(index));
}

inline void note_instance_streams(ResultRecord& rec) {
  rec.stream_map["size"] = "derive_stream(seed, \"size\", N)";
  rec.stream_map["instance"] = "derive_stream(size_stream, \"instance\", index)";
}

struct Moments {
  int n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();  // across values
  double std_error = std::numeric_limits<double>::quiet_NaN();
};

inline Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = static_cast<int>(v.size());
  if (m.n == 0) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / m.n;
  if (m.n >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.variance = ss / (m.n - 1);
    m.std_error = std::sqrt(m.variance / m.n);
  }
  return m;
}

inline void validate_common(const ExperimentSpec& spec) {
  if (spec.N_list.empty()) throw std::invalid_argument("need at least one system size");
  for (int N : spec.N_list)
    if (N < 2) throw std::invalid_argument("system sizes must be at least 2");
  if (spec.n_instances < 1) throw std::invalid_argument("need at least one instance");
  if (spec.workers < 1) throw std::invalid_argument("worker count must be positive");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Theory-only experiments
// ---------------------------------------------------------------------------

inline ResultRecord run_capacity_scan(const std::vector<double>& k_grid) {
  detail::WallClock clock;
  if (k_grid.empty()) throw std::invalid_argument("empty margin grid");
  if (!std::is_sorted(k_grid.begin(), k_grid.end()))
    throw std::invalid_argument("margin grid must be sorted ascending");
  if (k_grid.front() < 0.0) throw std::invalid_argument("margins must be nonnegative");

  ResultRecord rec;
  rec.spec.command = Command::capacity;
  rec.spec.k_grid = k_grid;
  rec.table.columns = {"k", "alpha_c"};
  double prev = std::numeric_limits<double>::infinity();
  for (double k : k_grid) {
    const double a = critical_capacity(k);
    if (!(a <= prev + 1e-12))
      throw convergence_error("capacity failed to decrease along the margin grid");
    prev = a;
    rec.table.rows.push_back({k, a});
  }
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

inline ResultRecord run_theory_table(const std::vector<double>& alpha_grid, double k,
                                     const std::vector<double>& eps_list) {
  detail::WallClock clock;
  if (alpha_grid.empty()) throw std::invalid_argument("empty alpha grid");
  for (double a : alpha_grid)
    if (!(a > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(k >= 0.0)) throw std::invalid_argument("margin must be nonnegative");
  for (double e : eps_list)
    if (!(e > 0.0)) throw std::invalid_argument("smoothing must be positive");

  ResultRecord rec;
  rec.spec.command = Command::free_energy;
  rec.spec.alpha_grid = alpha_grid;
  rec.spec.eps_list = eps_list;
  rec.spec.params.k = k;
  rec.table.columns = {"alpha", "q_star", "free_energy", "diverging"};
  for (double e : eps_list) {
    rec.table.columns.push_back("spherical_eps_" + format_double(e));
    rec.table.columns.push_back("z_min_eps_" + format_double(e));
  }

  const double a_c = critical_capacity(k);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double alpha : alpha_grid) {
    std::vector<double> row;
    if (alpha >= a_c) {
      row = {alpha, nan, nan, 1.0};
      for (std::size_t i = 0; i < eps_list.size(); ++i) {
        row.push_back(nan);
        row.push_back(nan);
      }
    } else {
      const GardnerMinimum gm = gardner_free_energy(alpha, k);
      row = {alpha, gm.q_star, gm.value, 0.0};
      for (double e : eps_list) {
        const SphericalValue sv = spherical_value(alpha, k, e);
        row.push_back(sv.value);
        row.push_back(sv.z_min);
      }
    }
    rec.table.rows.push_back(std::move(row));
  }
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

inline ResultRecord run_saddle_point(const ModelParams& params) {
  detail::WallClock clock;
  const SaddlePoint sp = solve_saddle(params);
  if (!sp.converged) throw convergence_error("saddle iteration did not converge");

  ResultRecord rec;
  rec.spec.command = Command::saddle;
  rec.spec.params = params;
  rec.table.columns = {"q", "R", "s", "value", "residual_f1", "residual_f2", "iterations"};
  rec.table.rows.push_back({sp.q, sp.R, sp.s, regularized_bracket(sp.q, sp.R, params),
                            sp.residual_f1, sp.residual_f2,
                            static_cast<double>(sp.iterations)});
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

// ---------------------------------------------------------------------------
// Simulation experiments
// ---------------------------------------------------------------------------

inline ResultRecord run_volume_experiment(const ExperimentSpec& spec) {
  detail::WallClock clock;
  detail::validate_common(spec);
  if (!(spec.params.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(spec.params.k >= 0.0)) throw std::invalid_argument("margin must be nonnegative");
  if (!(spec.M > 0.0)) throw std::invalid_argument("clip depth must be positive");

  ResultRecord rec;
  rec.spec = spec;
  rec.spec.command = Command::simulate_volume;
  detail::note_instance_streams(rec);
  rec.stream_map["patterns"] = "derive_stream(instance_stream, \"patterns\", 0)";
  rec.stream_map["volume"] = "derive_stream(instance_stream, \"volume\", 0)";
  rec.table.columns = {"N",        "p",         "n_ok",   "faults", "mean_log_theta",
                       "variance", "std_error", "clipped_fraction", "theory", "gap"};

  const double a_c = critical_capacity(spec.params.k);
  const double theory = spec.params.alpha < a_c
                            ? gardner_free_energy(spec.params.alpha, spec.params.k).value
                            : std::numeric_limits<double>::quiet_NaN();

  for (int N : spec.N_list) {
    const int p = static_cast<int>(std::lround(spec.params.alpha * N));
    if (p < 1) throw std::invalid_argument("alpha too small: no constraints at this size");
    WalkConfig cfg = default_walk_config(N);
    if (spec.samples > 0) cfg.samples_per_level = spec.samples;
    if (spec.steps > 0) cfg.steps_between_samples = spec.steps;
    validate_walk_config(cfg);

    std::vector<std::optional<VolumeEstimate>> out(spec.n_instances);
    detail::parallel_for(spec.n_instances, spec.workers, [&](int i) {
      try {
        const std::uint64_t iseed = detail::instance_seed(spec.seed, N, i);
        const PatternSet ps = make_patterns(p, N, iseed, PatternMode::binary);
        Rng rng(derive_stream(iseed, "volume", 0));
        out[i] = estimate_log_theta(ps, spec.params.k, spec.M, cfg, rng);
      } catch (const std::exception&) {
        out[i] = std::nullopt;  // faulted instance becomes a flagged count
      }
    });

    std::vector<double> totals;
    int clipped = 0;
    for (const auto& ve : out)
      if (ve) {
        totals.push_back(ve->total);
        clipped += ve->clipped ? 1 : 0;
      }
    const detail::Moments m = detail::moments(totals);
    const int faults = spec.n_instances - m.n;
    const double frac = m.n > 0 ? static_cast<double>(clipped) / m.n
                                : std::numeric_limits<double>::quiet_NaN();
    rec.table.rows.push_back({static_cast<double>(N), static_cast<double>(p),
                              static_cast<double>(m.n), static_cast<double>(faults),
                              m.mean, m.variance, m.std_error, frac, theory,
                              m.mean - theory});
  }
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

namespace detail {

struct GibbsSizeSummary {
  int N = 0, p = 0, n_ok = 0, faults = 0;
  Moments q, R, tq, tU, fact;
  SaddlePoint sp;                // solved at the realized ratio p/N
  ModelParams realized_params;   // spec params with alpha = p/N
  ConsistencyReport report;      // identities fed with the disorder-averaged estimates
};

// Runs n_instances Gibbs simulations of one system size and aggregates the
// order parameters across disorder (stderr across instances, which includes
// the field-realization spread on top of the Monte Carlo error).
inline GibbsSizeSummary gibbs_size_summary(const ExperimentSpec& spec, int N) {
  GibbsSizeSummary s;
  s.N = N;
  s.p = static_cast<int>(std::lround(spec.params.alpha * N));
  s.realized_params = spec.params;
  s.realized_params.alpha = static_cast<double>(s.p) / N;
  s.sp = solve_saddle(s.realized_params);
  if (!s.sp.converged) throw convergence_error("saddle iteration did not converge");

  std::vector<std::optional<OrderParameterEstimate>> out(spec.n_instances);
  parallel_for(spec.n_instances, spec.workers, [&](int i) {
    try {
      const std::uint64_t iseed = instance_seed(spec.seed, N, i);
      const DisorderInstance inst =
          make_instance(N, spec.params.alpha, spec.params, iseed);
      out[i] = estimate_order_parameters(inst, spec.chains, spec.sweeps, spec.burn_in);
    } catch (const std::exception&) {
      out[i] = std::nullopt;
    }
  });

  std::vector<double> qs, Rs, tqs, tUs, facts;
  for (const auto& est : out)
    if (est) {
      qs.push_back(est->q_N.value);
      Rs.push_back(est->R_N.value);
      tqs.push_back(est->tilde_q.value);
      tUs.push_back(est->tilde_U.value);
      if (std::isfinite(est->factorization_stat.value))
        facts.push_back(est->factorization_stat.value);
    }
  s.q = moments(qs);
  s.R = moments(Rs);
  s.tq = moments(tqs);
  s.tU = moments(tUs);
  s.fact = moments(facts);
  s.n_ok = s.q.n;
  s.faults = spec.n_instances - s.n_ok;

  if (s.n_ok >= 2) {
    OrderParameterEstimate agg;
    agg.q_N = {s.q.mean, s.q.std_error};
    agg.R_N = {s.R.mean, s.R.std_error};
    agg.tilde_q = {s.tq.mean, s.tq.std_error};
    agg.tilde_U = {s.tU.mean, s.tU.std_error};
    agg.n_chains = spec.chains;
    agg.n_sweeps = spec.sweeps;
    s.report = rs_consistency_report(agg, s.sp, s.realized_params);
  }
  return s;
}

}  // namespace detail

inline ResultRecord run_gibbs_experiment(const ExperimentSpec& spec) {
  detail::WallClock clock;
  detail::validate_common(spec);
  validate_saddle_params(spec.params);
  if (spec.chains < 2) throw std::invalid_argument("need at least two chains");
  if (spec.sweeps < 1 || spec.burn_in < 0) throw std::invalid_argument("bad sweep counts");

  ResultRecord rec;
  rec.spec = spec;
  rec.spec.command = Command::simulate_gibbs;
  detail::note_instance_streams(rec);
  rec.stream_map["field"] = "derive_stream(instance_stream, \"field\", 0)";
  rec.stream_map["chain"] = "derive_stream(instance_stream, \"chain\", chain_index)";
  rec.table.columns = {"N",        "p",         "n_ok",     "faults",     "q_mean",
                       "q_se",     "R_mean",    "R_se",     "tilde_q",    "tilde_q_se",
                       "tilde_U",  "tilde_U_se", "fact",    "fact_se",    "q_star",
                       "R_star",   "resid_q_closure", "resid_gap_closure", "identities_ok"};

  for (int N : spec.N_list) {
    const detail::GibbsSizeSummary s = detail::gibbs_size_summary(spec, N);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double resid_q = nan, resid_gap = nan, ok = nan;
    if (!s.report.rows.empty()) {
      resid_q = s.report.rows[0].measured - s.report.rows[0].predicted;
      resid_gap = s.report.rows[1].measured - s.report.rows[1].predicted;
      ok = s.report.all_ok ? 1.0 : 0.0;
    }
    rec.table.rows.push_back({static_cast<double>(s.N), static_cast<double>(s.p),
                              static_cast<double>(s.n_ok), static_cast<double>(s.faults),
                              s.q.mean, s.q.std_error, s.R.mean, s.R.std_error,
                              s.tq.mean, s.tq.std_error, s.tU.mean, s.tU.std_error,
                              s.fact.mean, s.fact.std_error, s.sp.q, s.sp.R, resid_q,
                              resid_gap, ok});
  }
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

inline ResultRecord run_factorization_experiment(const ExperimentSpec& spec) {
  detail::WallClock clock;
  detail::validate_common(spec);
  validate_saddle_params(spec.params);
  if (spec.chains < 4)
    throw std::invalid_argument("factorization statistic needs at least four chains");

  ResultRecord rec;
  rec.spec = spec;
  rec.spec.command = Command::factorization;
  detail::note_instance_streams(rec);
  rec.table.columns = {"N", "p", "n_ok", "faults", "fact", "fact_se", "gaussian_reference"};

  std::vector<double> logN, logF;
  for (int N : spec.N_list) {
    const detail::GibbsSizeSummary s = detail::gibbs_size_summary(spec, N);
    // exact at alpha = 0; included as the scale reference otherwise
    const double ref = 1.0 / (N * spec.params.z * spec.params.z);
    rec.table.rows.push_back({static_cast<double>(s.N), static_cast<double>(s.p),
                              static_cast<double>(s.n_ok), static_cast<double>(s.faults),
                              s.fact.mean, s.fact.std_error, ref});
    if (s.fact.n > 0 && s.fact.mean > 0.0) {
      logN.push_back(std::log(static_cast<double>(N)));
      logF.push_back(std::log(s.fact.mean));
    }
  }
  if (logN.size() >= 2) {
    const detail::Moments mx = detail::moments(logN);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < logN.size(); ++i) {
      sxy += (logN[i] - mx.mean) * logF[i];
      sxx += (logN[i] - mx.mean) * (logN[i] - mx.mean);
    }
    rec.extra["log_log_slope"] = sxy / sxx;
  }
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

inline ResultRecord run_consistency_experiment(const ExperimentSpec& spec) {
  detail::WallClock clock;
  detail::validate_common(spec);
  validate_saddle_params(spec.params);
  if (spec.n_instances < 2)
    throw std::invalid_argument("consistency table needs at least two instances");

  ResultRecord rec;
  rec.spec = spec;
  rec.spec.command = Command::consistency;
  detail::note_instance_streams(rec);

  const int N = spec.N_list.front();
  const detail::GibbsSizeSummary s = detail::gibbs_size_summary(spec, N);
  if (s.n_ok < 2) throw convergence_error("too many faulted instances for a report");

  rec.table.label_column = "check";
  rec.table.columns = {"measured", "predicted", "tolerance", "ok"};
  for (const ConsistencyRow& row : s.report.rows) {
    rec.table.row_labels.push_back(row.name);
    rec.table.rows.push_back({row.measured, row.predicted, row.tolerance,
                              row.ok ? 1.0 : 0.0});
  }
  rec.extra["n_ok"] = s.n_ok;
  rec.extra["faults"] = s.faults;
  rec.extra["all_ok"] = s.report.all_ok ? 1.0 : 0.0;
  rec.wallclock_seconds = clock.seconds();
  return rec;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v[i]);
  }
  return s;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

inline bool is_simulation(Command c) {
  return c == Command::simulate_volume || c == Command::simulate_gibbs ||
         c == Command::factorization || c == Command::consistency;
}

inline bool is_gibbs_like(Command c) {
  return c == Command::simulate_gibbs || c == Command::factorization ||
         c == Command::consistency;
}

}  // namespace detail

inline void write_csv(const ResultRecord& rec, std::ostream& os) {
  const ExperimentSpec& s = rec.spec;
  os << "# command = " << command_name(s.command) << '\n';
  os << "# version = " << rec.version << '\n';
  os << "# rng = " << rec.rng_name << '\n';
  os << "# format = " << format_name(s.format) << '\n';
  os << "# workers = " << s.workers << '\n';
  if (s.command == Command::capacity) {
    os << "# k_grid = " << detail::join_doubles(s.k_grid) << '\n';
  } else if (s.command == Command::free_energy) {
    os << "# alpha_grid = " << detail::join_doubles(s.alpha_grid) << '\n';
    os << "# k = " << format_double(s.params.k) << '\n';
    os << "# eps_list = " << detail::join_doubles(s.eps_list) << '\n';
  } else {
    os << "# alpha = " << format_double(s.params.alpha) << '\n';
    os << "# k = " << format_double(s.params.k) << '\n';
    os << "# h = " << format_double(s.params.h) << '\n';
    os << "# z = " << format_double(s.params.z) << '\n';
    os << "# eps = " << format_double(s.params.eps) << '\n';
  }
  if (detail::is_simulation(s.command)) {
    os << "# N_list = " << detail::join_ints(s.N_list) << '\n';
    std::string ps;
    for (std::size_t i = 0; i < s.N_list.size(); ++i) {
      if (i) ps += ' ';
      ps += std::to_string(std::lround(s.params.alpha * s.N_list[i]));
    }
    os << "# p_list = " << ps << '\n';
    os << "# n_instances = " << s.n_instances << '\n';
    os << "# seed = " << s.seed << '\n';
  }
  if (s.command == Command::simulate_volume) {
    os << "# M = " << format_double(s.M) << '\n';
    os << "# samples = " << s.samples << '\n';
    os << "# steps = " << s.steps << '\n';
  }
  if (detail::is_gibbs_like(s.command)) {
    os << "# chains = " << s.chains << '\n';
    os << "# sweeps = " << s.sweeps << '\n';
    os << "# burn_in = " << s.burn_in << '\n';
  }
  if (!s.output_path.empty()) os << "# out = " << s.output_path << '\n';
  for (const auto& [label, desc] : rec.stream_map)
    os << "# stream " << label << " = " << desc << '\n';
  for (const auto& [name, value] : rec.extra)
    os << "# " << name << " = " << format_double(value) << '\n';
  os << "# wallclock_s = " << format_double(rec.wallclock_seconds) << '\n';

  const Table& t = rec.table;
  if (!t.label_column.empty()) os << t.label_column << ',';
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    os << t.columns[c] << (c + 1 < t.columns.size() ? ',' : '\n');
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!t.label_column.empty()) os << t.row_labels[r] << ',';
    const auto& row = t.rows[r];
    for (std::size_t c = 0; c < row.size(); ++c)
      os << format_double(row[c]) << (c + 1 < row.size() ? ',' : '\n');
  }
}

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["command"] = command_name(s.command);
  j["format"] = format_name(s.format);
  j["workers"] = s.workers;
  j["output_path"] = s.output_path;
  if (s.command == Command::capacity) {
    j["k_grid"] = s.k_grid;
  } else if (s.command == Command::free_energy) {
    j["alpha_grid"] = s.alpha_grid;
    j["k"] = s.params.k;
    j["eps_list"] = s.eps_list;
  } else {
    j["params"] = {{"alpha", s.params.alpha}, {"k", s.params.k}, {"h", s.params.h},
                   {"z", s.params.z},         {"eps", s.params.eps}};
  }
  if (detail::is_simulation(s.command)) {
    j["N_list"] = s.N_list;
    std::vector<long> ps;
    for (int N : s.N_list) ps.push_back(std::lround(s.params.alpha * N));
    j["p_list"] = ps;
    j["n_instances"] = s.n_instances;
    j["seed"] = s.seed;
  }
  if (s.command == Command::simulate_volume) {
    j["M"] = s.M;
    j["samples"] = s.samples;
    j["steps"] = s.steps;
  }
  if (detail::is_gibbs_like(s.command)) {
    j["chains"] = s.chains;
    j["sweeps"] = s.sweeps;
    j["burn_in"] = s.burn_in;
  }
  return j;
}

inline void write_json(const ResultRecord& rec, std::ostream& os) {
  nlohmann::json j;
  j["spec"] = spec_to_json(rec.spec);
  nlohmann::json results = nlohmann::json::array();
  const Table& t = rec.table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    nlohmann::json row;
    if (!t.label_column.empty()) row[t.label_column] = t.row_labels[r];
    for (std::size_t c = 0; c < t.columns.size(); ++c) row[t.columns[c]] = t.rows[r][c];
    results.push_back(std::move(row));
  }
  j["results"] = std::move(results);
  j["meta"] = {{"version", rec.version},
               {"rng", rec.rng_name},
               {"wallclock_s", rec.wallclock_seconds},
               {"streams", rec.stream_map},
               {"extra", rec.extra}};
  os << j.dump(2) << '\n';
}

// Writes to spec.output_path ("" or "-" meaning stdout) in spec.format.
inline void write_output(const ResultRecord& rec) {
  const auto emit = [&](std::ostream& os) {
    if (rec.spec.format == Format::csv)
      write_csv(rec, os);
    else
      write_json(rec, os);
    os.flush();
    if (!os) throw io_error("write failed");
  };
  if (rec.spec.output_path.empty() || rec.spec.output_path == "-") {
    emit(std::cout);
    return;
  }
  std::ofstream f(rec.spec.output_path, std::ios::binary);  // binary: LF endings everywhere
  if (!f) throw io_error("cannot open output file: " + rec.spec.output_path);
  emit(f);
}

}  // namespace gardner
