#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hrisloc/bounds.hpp"
#include "hrisloc/config.hpp"
#include "hrisloc/estimator.hpp"
#include "hrisloc/scene.hpp"

namespace hrisloc {

enum class SweepVar { kPtDbm, kRho, kNumScatterers };

const char* sweep_var_name(SweepVar var);
SweepVar parse_sweep_var(const std::string& name);  // throws Error{kConfig}

struct ExperimentSpec {
  SystemConfig cfg;
  SceneState scene;
  SweepVar sweep_var = SweepVar::kPtDbm;
  std::vector<double> sweep_values;  // empty: single point at the base config
  int trials = 500;
  std::uint64_t seed = 1;
  std::string out_path = "results.csv";
  int num_scatterers = 0;
  double scatterer_rcs = 0.1;
  bool noiseless = false;
  int threads = 1;
  EstimatorConfig estimator;  // spectral_grid is overridden by cfg's value
};

// Flat key=value file ('#' comments); keys follow the system-parameter
// symbols (lambda, c, N_c, T, delta_f, N0, n_f, N_F, M_B, M_R, P_t, rho),
// scene entries (p_B, p_R, p_U as "x,y", alpha, b_R, b_U) and harness keys
// (trials, seed, num_scatterers, scatterer_rcs). Missing keys keep defaults;
// unknown keys, malformed lines and out-of-range values throw Error{kConfig}
// naming the line/field. An empty path returns pure defaults.
ExperimentSpec load_config(const std::string& path);
void validate_spec(const ExperimentSpec& spec);

// Deterministic per-trial seed; distinct across (point, trial) pairs.
std::uint64_t child_seed(std::uint64_t master, int point, int trial);

// Column order of both the error metrics and the bound metrics.
inline constexpr int kNumMetrics = 12;
extern const std::array<const char*, kNumMetrics> kMetricNames;

struct TrialResult {
  bool failed = false;
  std::string failure_cause;
  // Signed errors (angles wrapped) except pos_R/pos_U, which are Euclidean
  // distances. Channel entries compare the one-shot estimates; state entries
  // come from the recovered scene.
  std::array<double, kNumMetrics> error{};
  // Clutter-free bounds at this trial's codebook/gain draws.
  std::array<double, kNumMetrics> bound{};
  bool bound_valid = false;
  std::uint64_t seed = 0;
};

// Config and scatterer count at one sweep point.
struct PointConfig {
  SystemConfig cfg;
  int num_scatterers = 0;
};
PointConfig point_config(const ExperimentSpec& spec, int point);

// One synthesize-estimate cycle. Pipeline errors are recorded as a failed
// trial with the cause, not rethrown.
TrialResult run_trial(const ExperimentSpec& spec, int point, int trial);

struct PointSummary {
  double sweep_value = 0.0;
  int trials = 0;
  int failures = 0;
  std::array<double, kNumMetrics> rmse{};   // over successful trials
  bool rmse_valid = false;                  // false when every trial failed
  std::array<double, kNumMetrics> bound{};  // mean over valid-bound trials
  bool bound_valid = false;
};

struct ResultTable {
  std::string sweep_var;
  std::vector<PointSummary> rows;
};

// Monte Carlo over all sweep points. Trials run on spec.threads workers;
// results are aggregated by trial index, so the table is independent of the
// thread count.
ResultTable run_sweep(const ExperimentSpec& spec);

// Bounds without Monte Carlo: averages bound values over `trials` seeded
// codebook/gain draws per point; RMSE columns are left absent.
ResultTable run_bounds_only(const ExperimentSpec& spec);

// CSV: header `sweep_var,sweep_value,rmse_X,crb_X,...,trials,failures` with
// the 12 metric names, values with 9 significant digits, absent values as
// empty cells. Deterministic byte output for a given table.
void write_results(const ResultTable& table, const std::string& path);
std::string format_results(const ResultTable& table);

}  // namespace hrisloc
