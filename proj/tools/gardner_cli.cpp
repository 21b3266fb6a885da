// Command-line driver for the perceptron-volume laboratory.  Subcommands map
// one-to-one onto the experiment runners; all of them honor --format/--out/
// --workers and the exit-code contract (0 ok, 2 bad parameters, 3 failed to
// converge, 4 I/O failure).

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <gardner/experiment.hpp>

namespace {

using namespace gardner;

struct GlobalOpts {
  std::string format = "csv";
  std::string out;
  int workers = 1;
};

void apply_globals(ResultRecord& rec, const GlobalOpts& g) {
  rec.spec.format = g.format == "json" ? Format::json : Format::csv;
  rec.spec.output_path = g.out;
  rec.spec.workers = g.workers;
}

std::vector<double> build_grid(double lo, double hi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  if (hi < lo) throw std::invalid_argument("grid upper end below lower end");
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double v = lo + i * step;
    if (v > hi + 0.5 * step) break;
    grid.push_back(std::min(v, hi));
  }
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replica theory and Monte Carlo experiments for the spherical perceptron"};
  app.require_subcommand(1);
  // --h is a model parameter below, so help stays long-form only
  app.set_help_flag("--help", "print help and exit");

  GlobalOpts g;
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--out", g.out, "output path (default: stdout)");
  app.add_option("--workers", g.workers, "concurrent instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // ---- capacity ----
  double k_min = 0.0, k_max = 3.0, k_step = 0.25;
  CLI::App* cap = app.add_subcommand("capacity", "critical capacity along a margin grid");
  cap->fallthrough();
  cap->add_option("--k-min", k_min)->capture_default_str();
  cap->add_option("--k-max", k_max)->capture_default_str();
  cap->add_option("--k-step", k_step)->capture_default_str();

  // ---- free-energy ----
  std::vector<double> fe_alpha;
  double fe_k = 0.0;
  std::vector<double> fe_eps = {0.05, 0.02, 0.01};
  CLI::App* fe = app.add_subcommand("free-energy",
                                    "quenched free energy and soft-constraint values");
  fe->fallthrough();
  fe->add_option("--alpha", fe_alpha, "constraint ratios (repeatable)")->required();
  fe->add_option("--k", fe_k)->capture_default_str();
  fe->add_option("--eps", fe_eps, "smoothing values (repeatable)")->capture_default_str();

  // ---- saddle ----
  ModelParams sp_params{0.3, 0.0, 0.0, 1.0, 0.05};
  CLI::App* sad = app.add_subcommand("saddle", "replica-symmetric saddle point");
  sad->fallthrough();
  sad->set_help_flag("--help", "print help and exit");
  sad->add_option("--alpha", sp_params.alpha)->required();
  sad->add_option("--k", sp_params.k)->capture_default_str();
  sad->add_option("--h", sp_params.h)->capture_default_str();
  sad->add_option("--z", sp_params.z)->capture_default_str();
  sad->add_option("--eps", sp_params.eps)->capture_default_str();

  // ---- simulation commands share an ExperimentSpec ----
  ExperimentSpec spec;
  spec.params = ModelParams{0.3, 0.0, 0.0, 1.0, 0.05};

  const auto add_sim_options = [&](CLI::App* cmd, bool gibbs_knobs) {
    cmd->fallthrough();
    cmd->set_help_flag("--help", "print help and exit");
    cmd->add_option("--alpha", spec.params.alpha)->capture_default_str();
    cmd->add_option("--k", spec.params.k)->capture_default_str();
    cmd->add_option("--n", spec.N_list, "system sizes (repeatable)")->required();
    cmd->add_option("--instances", spec.n_instances)->capture_default_str();
    cmd->add_option("--seed", spec.seed)->capture_default_str();
    if (gibbs_knobs) {
      cmd->add_option("--h", spec.params.h)->capture_default_str();
      cmd->add_option("--z", spec.params.z)->capture_default_str();
      cmd->add_option("--eps", spec.params.eps)->capture_default_str();
      cmd->add_option("--chains", spec.chains)->capture_default_str();
      cmd->add_option("--sweeps", spec.sweeps)->capture_default_str();
      cmd->add_option("--burnin", spec.burn_in)->capture_default_str();
    }
  };

  CLI::App* vol = app.add_subcommand("simulate-volume",
                                     "telescoped Gardner-volume estimates over disorder");
  add_sim_options(vol, false);
  vol->add_option("--M", spec.M, "clip depth for empty realizations")->capture_default_str();
  vol->add_option("--samples", spec.samples, "walk samples per level (0 = default)")
      ->capture_default_str();
  vol->add_option("--steps", spec.steps, "walk steps between samples (0 = default)")
      ->capture_default_str();

  CLI::App* gib = app.add_subcommand("simulate-gibbs",
                                     "Gibbs order parameters vs the replica saddle");
  add_sim_options(gib, true);

  CLI::App* fac = app.add_subcommand("factorization",
                                     "correlation-factorization statistic across sizes");
  add_sim_options(fac, true);

  CLI::App* con = app.add_subcommand("consistency",
                                     "fixed-point identity report at one system size");
  add_sim_options(con, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  try {
    ResultRecord rec;
    if (cap->parsed()) {
      rec = run_capacity_scan(build_grid(k_min, k_max, k_step));
    } else if (fe->parsed()) {
      rec = run_theory_table(fe_alpha, fe_k, fe_eps);
    } else if (sad->parsed()) {
      rec = run_saddle_point(sp_params);
    } else {
      spec.workers = g.workers;
      if (vol->parsed())
        rec = run_volume_experiment(spec);
      else if (gib->parsed())
        rec = run_gibbs_experiment(spec);
      else if (fac->parsed())
        rec = run_factorization_experiment(spec);
      else
        rec = run_consistency_experiment(spec);
    }
    apply_globals(rec, g);
    write_output(rec);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 2;
  } catch (const gardner::convergence_error& e) {
    std::cerr << "non-convergence: " << e.what() << '\n';
    return 3;
  } catch (const gardner::io_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
