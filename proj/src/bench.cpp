#include "hrisloc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "hrisloc/codebooks.hpp"
#include "hrisloc/waveform.hpp"

namespace hrisloc {

const std::array<const char*, kNumMetrics> kMetricNames = {
    "tau_BR", "tau_BU", "tau_BRU", "theta_BR", "theta_BU", "theta_RU",
    "phi_RB", "pos_R",  "pos_U",   "alpha",    "b_R",      "b_U"};

const char* sweep_var_name(SweepVar var) {
  switch (var) {
    case SweepVar::kPtDbm: return "Pt_dBm";
    case SweepVar::kRho: return "rho";
    default: return "num_scatterers";
  }
}

SweepVar parse_sweep_var(const std::string& name) {
  if (name == "Pt_dBm") return SweepVar::kPtDbm;
  if (name == "rho") return SweepVar::kRho;
  if (name == "num_scatterers") return SweepVar::kNumScatterers;
  throw Error(ErrorKind::kConfig,
              "config: unknown sweep variable '" + name +
                  "' (expected Pt_dBm, rho or num_scatterers)");
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig,
                "config: field '" + key + "' has non-numeric value '" + value +
                    "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  double v = parse_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw Error(ErrorKind::kConfig,
                "config: field '" + key + "' must be an integer, got '" +
                    value + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig,
                "config: field '" + key + "' must be a non-negative integer, "
                "got '" + value + "'");
  }
}

Eigen::Vector2d parse_vec2(const std::string& key, const std::string& value) {
  auto comma = value.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorKind::kConfig,
                "config: field '" + key + "' must be 'x,y', got '" + value +
                    "'");
  }
  return {parse_double(key, value.substr(0, comma)),
          parse_double(key, value.substr(comma + 1))};
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

ExperimentSpec load_config(const std::string& path) {
  ExperimentSpec spec;
  if (path.empty()) return spec;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "config: cannot open " + path);

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig,
                  "config: line " + std::to_string(line_no) +
                      " is not 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "lambda") spec.cfg.lambda = parse_double(key, value);
    else if (key == "c") spec.cfg.c = parse_double(key, value);
    else if (key == "N_c") spec.cfg.n_subcarriers = parse_int(key, value);
    else if (key == "T") spec.cfg.n_transmissions = parse_int(key, value);
    else if (key == "delta_f") spec.cfg.delta_f = parse_double(key, value);
    else if (key == "N0") spec.cfg.noise_psd_dbm_hz = parse_double(key, value);
    else if (key == "n_f") spec.cfg.noise_figure_db = parse_double(key, value);
    else if (key == "N_F") spec.cfg.spectral_grid = parse_int(key, value);
    else if (key == "M_B") spec.cfg.n_bs_antennas = parse_int(key, value);
    else if (key == "M_R") spec.cfg.n_ris_elements = parse_int(key, value);
    else if (key == "P_t") spec.cfg.pt_dbm = parse_double(key, value);
    else if (key == "rho") spec.cfg.rho = parse_double(key, value);
    else if (key == "p_B") spec.scene.p_b = parse_vec2(key, value);
    else if (key == "p_R") spec.scene.p_r = parse_vec2(key, value);
    else if (key == "p_U") spec.scene.p_u = parse_vec2(key, value);
    else if (key == "alpha") spec.scene.alpha = parse_double(key, value);
    else if (key == "b_R") spec.scene.b_r = parse_double(key, value);
    else if (key == "b_U") spec.scene.b_u = parse_double(key, value);
    else if (key == "trials") spec.trials = parse_int(key, value);
    else if (key == "seed") spec.seed = parse_u64(key, value);
    else if (key == "num_scatterers")
      spec.num_scatterers = parse_int(key, value);
    else if (key == "scatterer_rcs")
      spec.scatterer_rcs = parse_double(key, value);
    else
      throw Error(ErrorKind::kConfig,
                  "config: unknown field '" + key + "' at line " +
                      std::to_string(line_no));
  }
  validate_spec(spec);
  return spec;
}

void validate_spec(const ExperimentSpec& spec) {
  validate_config(spec.cfg);
  validate_scene(spec.scene, spec.cfg);
  if (spec.trials < 1) {
    throw Error(ErrorKind::kConfig, "config: trials must be >= 1");
  }
  if (spec.threads < 1) {
    throw Error(ErrorKind::kConfig, "config: threads must be >= 1");
  }
  if (spec.num_scatterers < 0) {
    throw Error(ErrorKind::kConfig, "config: num_scatterers must be >= 0");
  }
  if (!(spec.scatterer_rcs > 0.0)) {
    throw Error(ErrorKind::kConfig, "config: scatterer_rcs must be > 0");
  }
  for (double v : spec.sweep_values) {
    switch (spec.sweep_var) {
      case SweepVar::kRho:
        if (v < 0.0 || v > 1.0) {
          throw Error(ErrorKind::kConfig,
                      "config: sweep value for rho outside [0,1]");
        }
        break;
      case SweepVar::kNumScatterers:
        if (v < 0.0 || v != std::floor(v)) {
          throw Error(ErrorKind::kConfig,
                      "config: sweep value for num_scatterers must be a "
                      "non-negative integer");
        }
        break;
      case SweepVar::kPtDbm:
        break;
    }
  }
}

std::uint64_t child_seed(std::uint64_t master, int point, int trial) {
  std::uint64_t mixed =
      splitmix64(master + 0x9E3779B97F4A7C15ull *
                              (static_cast<std::uint64_t>(point) + 1));
  return splitmix64(mixed + 0xBF58476D1CE4E5B9ull *
                                (static_cast<std::uint64_t>(trial) + 1));
}

PointConfig point_config(const ExperimentSpec& spec, int point) {
  PointConfig out{spec.cfg, spec.num_scatterers};
  if (spec.sweep_values.empty()) return out;
  double value = spec.sweep_values.at(point);
  switch (spec.sweep_var) {
    case SweepVar::kPtDbm: out.cfg.pt_dbm = value; break;
    case SweepVar::kRho: out.cfg.rho = value; break;
    case SweepVar::kNumScatterers:
      out.num_scatterers = static_cast<int>(value);
      break;
  }
  return out;
}

TrialResult run_trial(const ExperimentSpec& spec, int point, int trial) {
  PointConfig pc = point_config(spec, point);
  TrialResult out;
  out.seed = child_seed(spec.seed, point, trial);
  Rng rng(out.seed);

  CodebookSet books = build_codebooks(pc.cfg, rng);
  ChannelParams truth = channel_params_from_state(spec.scene, pc.cfg, rng);
  std::vector<ScatterPoint> sps =
      draw_scatter_points(pc.num_scatterers, spec.scatterer_rcs, rng);
  ObservationSet obs = synth_with_params(truth, spec.scene, pc.cfg, books, sps,
                                         rng, spec.noiseless);

  try {
    Eigen::MatrixXd fim = fim_channel(
        spec.scene, pc.cfg, books,
        PathGains{truth.g_br, truth.g_bu, truth.g_bru});
    BoundReport report = crb_state(fim, spec.scene, pc.cfg.c);
    out.bound = {report.channel.teb_br,       report.channel.teb_bu,
                 report.channel.teb_bru,      report.channel.aeb_theta_br,
                 report.channel.aeb_theta_bu, report.channel.aeb_theta_ru,
                 report.channel.aeb_phi_rb,   report.peb_r,
                 report.peb_u,                report.oeb,
                 report.beb_r,                report.beb_u};
    out.bound_valid = true;
  } catch (const Error&) {
    out.bound_valid = false;  // e.g. rho endpoint: bounds diverge
  }

  EstimatorConfig est = spec.estimator;
  est.spectral_grid = pc.cfg.spectral_grid;
  try {
    PipelineResult result =
        run_pipeline(obs, books, pc.cfg, est, spec.scene.p_b);
    const ChannelParams& p = result.channel.params;
    const SceneEstimate& s = result.scene;
    out.error = {p.tau_br - truth.tau_br,
                 p.tau_bu - truth.tau_bu,
                 p.tau_bru - truth.tau_bru,
                 wrap_pi(p.theta_br - truth.theta_br),
                 wrap_pi(p.theta_bu - truth.theta_bu),
                 wrap_pi(p.theta_ru - truth.theta_ru),
                 wrap_pi(p.phi_rb - truth.phi_rb),
                 (s.p_r - spec.scene.p_r).norm(),
                 (s.p_u - spec.scene.p_u).norm(),
                 wrap_pi(s.alpha - spec.scene.alpha),
                 s.b_r - spec.scene.b_r,
                 s.b_u - spec.scene.b_u};
  } catch (const Error& e) {
    out.failed = true;
    out.failure_cause = e.what();
  }
  return out;
}

namespace {

PointSummary summarize(const ExperimentSpec& spec, int point,
                       const std::vector<TrialResult>& results) {
  PointConfig pc = point_config(spec, point);
  PointSummary s;
  switch (spec.sweep_var) {
    case SweepVar::kPtDbm: s.sweep_value = pc.cfg.pt_dbm; break;
    case SweepVar::kRho: s.sweep_value = pc.cfg.rho; break;
    case SweepVar::kNumScatterers: s.sweep_value = pc.num_scatterers; break;
  }
  s.trials = static_cast<int>(results.size());
  std::array<double, kNumMetrics> sq_sum{}, bound_sum{};
  int successes = 0, bounded = 0;
  for (const TrialResult& r : results) {
    if (r.failed) {
      ++s.failures;
    } else {
      ++successes;
      for (int k = 0; k < kNumMetrics; ++k) sq_sum[k] += r.error[k] * r.error[k];
    }
    if (r.bound_valid) {
      ++bounded;
      for (int k = 0; k < kNumMetrics; ++k) bound_sum[k] += r.bound[k];
    }
  }
  s.rmse_valid = successes > 0;
  if (s.rmse_valid) {
    for (int k = 0; k < kNumMetrics; ++k) s.rmse[k] = std::sqrt(sq_sum[k] / successes);
  }
  s.bound_valid = bounded > 0;
  if (s.bound_valid) {
    for (int k = 0; k < kNumMetrics; ++k) s.bound[k] = bound_sum[k] / bounded;
  }
  return s;
}

std::vector<TrialResult> run_point(const ExperimentSpec& spec, int point) {
  std::vector<TrialResult> results(spec.trials);
  int workers = std::min(spec.threads, spec.trials);
  if (workers <= 1) {
    for (int i = 0; i < spec.trials; ++i) results[i] = run_trial(spec, point, i);
    return results;
  }
  std::atomic<int> next{0};
  auto body = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= spec.trials) break;
      results[i] = run_trial(spec, point, i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (std::thread& t : pool) t.join();
  return results;
}

}  // namespace

ResultTable run_sweep(const ExperimentSpec& spec) {
  validate_spec(spec);
  ResultTable table;
  table.sweep_var = sweep_var_name(spec.sweep_var);
  int n_points =
      spec.sweep_values.empty() ? 1 : static_cast<int>(spec.sweep_values.size());
  for (int p = 0; p < n_points; ++p) {
    table.rows.push_back(summarize(spec, p, run_point(spec, p)));
  }
  return table;
}

ResultTable run_bounds_only(const ExperimentSpec& spec) {
  validate_spec(spec);
  ResultTable table;
  table.sweep_var = sweep_var_name(spec.sweep_var);
  int n_points =
      spec.sweep_values.empty() ? 1 : static_cast<int>(spec.sweep_values.size());
  for (int p = 0; p < n_points; ++p) {
    PointConfig pc = point_config(spec, p);
    PointSummary s;
    switch (spec.sweep_var) {
      case SweepVar::kPtDbm: s.sweep_value = pc.cfg.pt_dbm; break;
      case SweepVar::kRho: s.sweep_value = pc.cfg.rho; break;
      case SweepVar::kNumScatterers: s.sweep_value = pc.num_scatterers; break;
    }
    s.trials = spec.trials;
    std::array<double, kNumMetrics> sum{};
    int valid = 0;
    for (int d = 0; d < spec.trials; ++d) {
      Rng rng(child_seed(spec.seed, p, d));
      CodebookSet books = build_codebooks(pc.cfg, rng);
      ChannelParams truth = channel_params_from_state(spec.scene, pc.cfg, rng);
      try {
        Eigen::MatrixXd fim = fim_channel(
            spec.scene, pc.cfg, books,
            PathGains{truth.g_br, truth.g_bu, truth.g_bru});
        BoundReport report = crb_state(fim, spec.scene, pc.cfg.c);
        std::array<double, kNumMetrics> b = {
            report.channel.teb_br,       report.channel.teb_bu,
            report.channel.teb_bru,      report.channel.aeb_theta_br,
            report.channel.aeb_theta_bu, report.channel.aeb_theta_ru,
            report.channel.aeb_phi_rb,   report.peb_r,
            report.peb_u,                report.oeb,
            report.beb_r,                report.beb_u};
        for (int k = 0; k < kNumMetrics; ++k) sum[k] += b[k];
        ++valid;
      } catch (const Error&) {
        ++s.failures;
      }
    }
    s.bound_valid = valid > 0;
    if (s.bound_valid) {
      for (int k = 0; k < kNumMetrics; ++k) s.bound[k] = sum[k] / valid;
    }
    table.rows.push_back(s);
  }
  return table;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string format_results(const ResultTable& table) {
  std::ostringstream out;
  out << "sweep_var,sweep_value";
  for (const char* name : kMetricNames) {
    out << ",rmse_" << name << ",crb_" << name;
  }
  out << ",trials,failures\n";
  for (const PointSummary& row : table.rows) {
    out << table.sweep_var << ',' << fmt(row.sweep_value);
    for (int k = 0; k < kNumMetrics; ++k) {
      out << ',';
      if (row.rmse_valid) out << fmt(row.rmse[k]);
      out << ',';
      if (row.bound_valid) out << fmt(row.bound[k]);
    }
    out << ',' << row.trials << ',' << row.failures << '\n';
  }
  return out.str();
}

void write_results(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot open output file " + path);
  out << format_results(table);
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path);
}

}  // namespace hrisloc
