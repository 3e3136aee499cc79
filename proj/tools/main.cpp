#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hrisloc/bench.hpp"

namespace {

struct CliArgs {
  std::string config;
  std::string sweep;
  std::vector<double> values;
  int trials = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool noiseless = false;
  int threads = 1;
};

// Command line takes precedence over the config file.
hrisloc::ExperimentSpec build_spec(const CliArgs& args, int default_trials) {
  hrisloc::ExperimentSpec spec = hrisloc::load_config(args.config);
  if (!args.sweep.empty()) spec.sweep_var = hrisloc::parse_sweep_var(args.sweep);
  spec.sweep_values = args.values;
  if (args.trials > 0) spec.trials = args.trials;
  else if (args.config.empty()) spec.trials = default_trials;
  if (args.seed_set) spec.seed = args.seed;
  if (!args.out.empty()) spec.out_path = args.out;
  spec.noiseless = args.noiseless;
  spec.threads = args.threads;
  hrisloc::validate_spec(spec);
  return spec;
}

void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config, "key=value config file");
  cmd->add_option("--sweep", args.sweep,
                  "sweep variable: Pt_dBm, rho or num_scatterers");
  cmd->add_option("--values", args.values, "sweep values")->delimiter(',');
  cmd->add_option("--trials", args.trials, "trials per sweep point");
  cmd->add_option("--seed", args.seed, "master RNG seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out, "output CSV path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HRIS/user joint localization: Monte Carlo benchmarks and "
               "Cramér-Rao bound tables"};
  app.require_subcommand(1);

  CliArgs sim_args;
  CLI::App* sim = app.add_subcommand(
      "simulate", "run the estimator over noisy trials and emit RMSE vs CRB");
  add_common(sim, sim_args);
  sim->add_flag("--noiseless", sim_args.noiseless,
                "suppress thermal noise (debug)");
  sim->add_option("--threads", sim_args.threads, "worker threads");

  CliArgs bound_args;
  CLI::App* bounds = app.add_subcommand(
      "bounds-only", "emit CRB tables without Monte Carlo (bound columns "
                     "averaged over --trials codebook/gain draws)");
  add_common(bounds, bound_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      hrisloc::ExperimentSpec spec = build_spec(sim_args, 500);
      hrisloc::ResultTable table = hrisloc::run_sweep(spec);
      hrisloc::write_results(table, spec.out_path);
      std::printf("wrote %zu sweep point(s) to %s\n", table.rows.size(),
                  spec.out_path.c_str());
    } else {
      hrisloc::ExperimentSpec spec = build_spec(bound_args, 10);
      hrisloc::ResultTable table = hrisloc::run_bounds_only(spec);
      hrisloc::write_results(table, spec.out_path);
      std::printf("wrote %zu bound row(s) to %s\n", table.rows.size(),
                  spec.out_path.c_str());
    }
  } catch (const hrisloc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
