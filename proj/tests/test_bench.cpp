#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "hrisloc/bench.hpp"

using namespace hrisloc;

namespace {

// Reduced radio dimensions keep aggregation tests fast; the estimator still
// runs end to end on every trial.
ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.cfg.n_subcarriers = 32;
  spec.cfg.n_transmissions = 8;
  spec.cfg.n_bs_antennas = 5;
  spec.cfg.n_ris_elements = 9;
  spec.cfg.spectral_grid = 256;
  spec.estimator.joint_grid_points = 64;
  spec.estimator.angle_grid_points = 512;
  spec.trials = 6;
  spec.seed = 12;
  spec.noiseless = true;  // deterministic per-trial biases, zero failures
  return spec;
}

std::string write_temp(const std::string& body) {
  std::string path = "/tmp/hrisloc_test_config.txt";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("load_config with an empty path returns the reference defaults") {
  ExperimentSpec spec = load_config("");
  CHECK(spec.cfg.lambda == 0.01);
  CHECK(spec.cfg.n_subcarriers == 100);
  CHECK(spec.cfg.n_transmissions == 32);
  CHECK(spec.cfg.delta_f == 120e3);
  CHECK(spec.cfg.n_bs_antennas == 17);
  CHECK(spec.cfg.n_ris_elements == 33);
  CHECK(spec.cfg.pt_dbm == 0.0);
  CHECK(spec.cfg.rho == 0.5);
  CHECK(spec.scene.alpha == doctest::Approx(kPi / 6.0));
  CHECK(spec.scene.p_r == Eigen::Vector2d(2.0, 10.0));
  CHECK(spec.scene.p_u == Eigen::Vector2d(6.0, 6.0));
  CHECK(spec.trials == 500);
}

TEST_CASE("load_config applies overrides and tolerates comments") {
  std::string path = write_temp(
      "# benchmark overrides\n"
      "P_t = 10.5\n"
      "rho=0.25   # inline comment\n"
      "\n"
      "p_U = 5.0, 7.5\n"
      "trials = 40\n"
      "seed = 77\n"
      "num_scatterers = 2\n");
  ExperimentSpec spec = load_config(path);
  CHECK(spec.cfg.pt_dbm == 10.5);
  CHECK(spec.cfg.rho == 0.25);
  CHECK(spec.scene.p_u == Eigen::Vector2d(5.0, 7.5));
  CHECK(spec.trials == 40);
  CHECK(spec.seed == 77);
  CHECK(spec.num_scatterers == 2);
  std::remove(path.c_str());
}

TEST_CASE("load_config reports the offending field or line") {
  auto error_of = [](const std::string& body) {
    std::string path = write_temp(body);
    std::string message;
    try {
      load_config(path);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfig);
      message = e.what();
    }
    std::remove(path.c_str());
    CHECK(!message.empty());
    return message;
  };

  CHECK(error_of("rho = 1.5\n").find("rho") != std::string::npos);
  CHECK(error_of("bandwidth = 3\n").find("bandwidth") != std::string::npos);
  CHECK(error_of("just some words\n").find("line 1") != std::string::npos);
  CHECK(error_of("T = eight\n").find("'T'") != std::string::npos);
  CHECK(error_of("p_R = 4\n").find("p_R") != std::string::npos);

  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), Error);
}

TEST_CASE("sweep variable names round-trip") {
  CHECK(parse_sweep_var("Pt_dBm") == SweepVar::kPtDbm);
  CHECK(parse_sweep_var("rho") == SweepVar::kRho);
  CHECK(parse_sweep_var("num_scatterers") == SweepVar::kNumScatterers);
  CHECK(std::string(sweep_var_name(SweepVar::kRho)) == "rho");
  CHECK_THROWS_AS(parse_sweep_var("power"), Error);
}

TEST_CASE("validate_spec enforces ranges") {
  ExperimentSpec bad_trials = small_spec();
  bad_trials.trials = 0;
  CHECK_THROWS_AS(validate_spec(bad_trials), Error);

  ExperimentSpec bad_rho = small_spec();
  bad_rho.sweep_var = SweepVar::kRho;
  bad_rho.sweep_values = {0.2, 1.2};
  CHECK_THROWS_AS(validate_spec(bad_rho), Error);

  ExperimentSpec bad_sp = small_spec();
  bad_sp.sweep_var = SweepVar::kNumScatterers;
  bad_sp.sweep_values = {0.0, 1.5};
  CHECK_THROWS_AS(validate_spec(bad_sp), Error);

  ExperimentSpec any_pt = small_spec();
  any_pt.sweep_var = SweepVar::kPtDbm;
  any_pt.sweep_values = {-30.0, 25.0};
  CHECK_NOTHROW(validate_spec(any_pt));
}

TEST_CASE("child seeds are deterministic and pairwise distinct") {
  std::set<std::uint64_t> seen;
  for (int point = 0; point < 20; ++point) {
    for (int trial = 0; trial < 500; ++trial) {
      std::uint64_t s = child_seed(33, point, trial);
      CHECK(seen.insert(s).second);
      CHECK(s == child_seed(33, point, trial));
    }
  }
  CHECK(child_seed(33, 0, 0) != child_seed(34, 0, 0));
}

TEST_CASE("point_config maps the sweep value onto the right knob") {
  ExperimentSpec spec = small_spec();
  spec.sweep_var = SweepVar::kPtDbm;
  spec.sweep_values = {-5.0, 15.0};
  CHECK(point_config(spec, 0).cfg.pt_dbm == -5.0);
  CHECK(point_config(spec, 1).cfg.pt_dbm == 15.0);

  spec.sweep_var = SweepVar::kRho;
  spec.sweep_values = {0.3};
  CHECK(point_config(spec, 0).cfg.rho == 0.3);
  CHECK(point_config(spec, 0).num_scatterers == spec.num_scatterers);

  spec.sweep_var = SweepVar::kNumScatterers;
  spec.sweep_values = {3.0};
  CHECK(point_config(spec, 0).num_scatterers == 3);

  spec.sweep_values.clear();
  CHECK(point_config(spec, 0).cfg.rho == spec.cfg.rho);
}

TEST_CASE("run_trial is bit-deterministic in (seed, point, trial)") {
  ExperimentSpec spec = small_spec();
  spec.noiseless = false;  // include the noise draws in the contract
  TrialResult a = run_trial(spec, 0, 3);
  TrialResult b = run_trial(spec, 0, 3);
  CHECK(a.failed == b.failed);
  CHECK(a.seed == b.seed);
  for (int k = 0; k < kNumMetrics; ++k) {
    CHECK(a.error[k] == b.error[k]);
    CHECK(a.bound[k] == b.bound[k]);
  }
  TrialResult c = run_trial(spec, 0, 4);
  CHECK(a.error != c.error);
}

TEST_CASE("a noiseless trial recovers the channel and state") {
  ExperimentSpec spec;  // full-size reference configuration
  spec.noiseless = true;
  spec.trials = 1;
  spec.seed = 42;
  TrialResult r = run_trial(spec, 0, 0);
  REQUIRE(!r.failed);
  REQUIRE(r.bound_valid);
  CHECK(std::abs(r.error[0]) < 1e-11);   // tau_BR
  CHECK(std::abs(r.error[1]) < 1e-11);   // tau_BU
  CHECK(std::abs(r.error[2]) < 1e-11);   // tau_BRU
  CHECK(std::abs(r.error[3]) < 1e-5);    // theta_BR
  CHECK(std::abs(r.error[4]) < 5e-5);    // theta_BU keeps the one-pass bias
  CHECK(std::abs(r.error[5]) < 1e-5);    // theta_RU
  CHECK(std::abs(r.error[6]) < 1e-9);    // phi_RB
  CHECK(std::abs(r.error[7]) < 1e-7);    // pos_R
  CHECK(std::abs(r.error[8]) < 1e-7);    // pos_U
  CHECK(std::abs(r.error[9]) < 1e-9);    // alpha
  CHECK(std::abs(r.error[10]) < 1e-12);  // b_R, sub-picosecond
  CHECK(std::abs(r.error[11]) < 1e-12);  // b_U
}

TEST_CASE("a zero power split is recorded as a failed trial") {
  ExperimentSpec spec = small_spec();
  spec.sweep_var = SweepVar::kRho;
  spec.sweep_values = {0.0};
  TrialResult r = run_trial(spec, 0, 0);
  CHECK(r.failed);
  CHECK(r.failure_cause.find("power split") != std::string::npos);
  CHECK(!r.bound_valid);  // the bounds diverge there as well
}

TEST_CASE("run_sweep aggregates exactly what run_trial produces") {
  ExperimentSpec spec = small_spec();
  ResultTable table = run_sweep(spec);
  REQUIRE(table.rows.size() == 1);
  const PointSummary& row = table.rows[0];
  CHECK(row.trials == spec.trials);
  CHECK(row.failures == 0);
  REQUIRE(row.rmse_valid);
  REQUIRE(row.bound_valid);

  std::array<double, kNumMetrics> sq{}, bsum{};
  for (int t = 0; t < spec.trials; ++t) {
    TrialResult r = run_trial(spec, 0, t);
    REQUIRE(!r.failed);
    for (int k = 0; k < kNumMetrics; ++k) {
      sq[k] += r.error[k] * r.error[k];
      bsum[k] += r.bound[k];
    }
  }
  for (int k = 0; k < kNumMetrics; ++k) {
    CHECK(row.rmse[k] == doctest::Approx(std::sqrt(sq[k] / spec.trials))
                             .epsilon(1e-12));
    CHECK(row.bound[k] ==
          doctest::Approx(bsum[k] / spec.trials).epsilon(1e-12));
  }
}

TEST_CASE("sweep results are independent of the thread count") {
  ExperimentSpec spec = small_spec();
  spec.sweep_var = SweepVar::kPtDbm;
  spec.sweep_values = {0.0, 10.0};
  spec.threads = 1;
  std::string serial = format_results(run_sweep(spec));
  spec.threads = 4;
  std::string threaded = format_results(run_sweep(spec));
  CHECK(serial == threaded);
  // and of the run itself
  CHECK(format_results(run_sweep(spec)) == threaded);
}

TEST_CASE("format_results emits the documented CSV layout") {
  ResultTable empty;
  empty.sweep_var = "rho";
  std::string header = format_results(empty);
  CHECK(header ==
        "sweep_var,sweep_value"
        ",rmse_tau_BR,crb_tau_BR,rmse_tau_BU,crb_tau_BU"
        ",rmse_tau_BRU,crb_tau_BRU,rmse_theta_BR,crb_theta_BR"
        ",rmse_theta_BU,crb_theta_BU,rmse_theta_RU,crb_theta_RU"
        ",rmse_phi_RB,crb_phi_RB,rmse_pos_R,crb_pos_R"
        ",rmse_pos_U,crb_pos_U,rmse_alpha,crb_alpha"
        ",rmse_b_R,crb_b_R,rmse_b_U,crb_b_U,trials,failures\n");

  ResultTable one;
  one.sweep_var = "Pt_dBm";
  PointSummary row;
  row.sweep_value = 2.5;
  row.trials = 7;
  row.failures = 1;
  row.rmse_valid = true;
  row.bound_valid = true;
  for (int k = 0; k < kNumMetrics; ++k) {
    row.rmse[k] = 0.1 * (k + 1);
    row.bound[k] = 1.0 / 3.0;
  }
  one.rows.push_back(row);
  std::string text = format_results(one);
  // nine significant digits, e.g. 1/3
  CHECK(text.find("0.333333333") != std::string::npos);
  CHECK(text.find("Pt_dBm,2.5,0.1,0.333333333,") != std::string::npos);
  CHECK(text.back() == '\n');

  // absent values render as empty cells
  row.rmse_valid = false;
  ResultTable absent;
  absent.sweep_var = "rho";
  absent.rows.push_back(row);
  std::string no_rmse = format_results(absent);
  CHECK(no_rmse.find("rho,2.5,,0.333333333") != std::string::npos);
}

TEST_CASE("write_results round-trips through the filesystem byte-for-byte") {
  ExperimentSpec spec = small_spec();
  spec.trials = 2;
  ResultTable table = run_sweep(spec);
  std::string want = format_results(table);

  std::string path = "/tmp/hrisloc_test_results.csv";
  write_results(table, path);
  std::ifstream in(path, std::ios::binary);
  std::string got((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  CHECK(got == want);
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_results(table, "/nonexistent/dir/results.csv"), Error);
}

TEST_CASE("run_bounds_only fills bound columns and leaves RMSE absent") {
  ExperimentSpec spec = small_spec();
  spec.trials = 3;
  spec.sweep_var = SweepVar::kRho;
  spec.sweep_values = {0.3, 0.7};
  ResultTable table = run_bounds_only(spec);
  REQUIRE(table.rows.size() == 2);
  for (const PointSummary& row : table.rows) {
    CHECK(!row.rmse_valid);
    CHECK(row.bound_valid);
    CHECK(row.failures == 0);
    for (int k = 0; k < kNumMetrics; ++k) CHECK(row.bound[k] > 0.0);
  }
  // CSV renders empty RMSE cells back to back
  std::string text = format_results(table);
  CHECK(text.find("rho,0.3,,") != std::string::npos);
}
