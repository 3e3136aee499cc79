#include "hrisloc/waveform.hpp"

#include <cmath>

namespace hrisloc {

void validate_config(const SystemConfig& cfg) {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw Error(ErrorKind::kConfig, std::string("config: ") + field);
  };
  require(cfg.lambda > 0.0, "lambda must be positive");
  require(cfg.c > 0.0, "c must be positive");
  require(cfg.n_subcarriers >= 2, "N_c must be at least 2");
  require(cfg.n_transmissions >= 1, "T must be at least 1");
  require(cfg.delta_f > 0.0, "delta_f must be positive");
  require(cfg.spectral_grid >= cfg.n_subcarriers, "N_F must be >= N_c");
  require(cfg.n_bs_antennas >= 2, "M_B must be at least 2");
  require(cfg.n_ris_elements >= 2, "M_R must be at least 2");
  require(cfg.rho >= 0.0 && cfg.rho <= 1.0, "rho must lie in [0, 1]");
}

Eigen::VectorXcd delay_steering(double tau, int n_subcarriers, double delta_f) {
  if (n_subcarriers < 1 || delta_f <= 0.0) {
    throw Error(ErrorKind::kConfig, "delay_steering: bad grid");
  }
  Eigen::VectorXcd d(n_subcarriers);
  for (int n = 0; n < n_subcarriers; ++n) {
    d(n) = std::polar(1.0, -2.0 * kPi * n * delta_f * tau);
  }
  return d;
}

Eigen::VectorXcd ula_steering(double angle, int n_elements) {
  if (n_elements < 2) {
    throw Error(ErrorKind::kConfig, "ula_steering: need at least 2 elements");
  }
  Eigen::VectorXcd a(n_elements);
  double s = std::sin(angle);
  double center = 0.5 * (n_elements - 1);
  for (int m = 0; m < n_elements; ++m) {
    a(m) = std::polar(1.0, -kPi * s * (m - center));
  }
  return a;
}

double noise_variance_mw(const SystemConfig& cfg) {
  double psd_mw_hz = db_to_linear(cfg.noise_psd_dbm_hz + cfg.noise_figure_db);
  return psd_mw_hz * cfg.n_subcarriers * cfg.delta_f;
}

double cascade_amplitude(const SystemConfig& cfg, double d_br, double d_ru) {
  return kPanelAggregation * cfg.lambda * cfg.lambda /
         (16.0 * kPi * kPi * d_br * d_ru);
}

PathGains path_gains(const SceneState& scene, const SystemConfig& cfg,
                     Rng& rng) {
  double d_br = (scene.p_r - scene.p_b).norm();
  double d_bu = (scene.p_u - scene.p_b).norm();
  double d_ru = (scene.p_u - scene.p_r).norm();
  double friis = cfg.lambda / (4.0 * kPi);
  PathGains g;
  g.g_br = kSensePortAmplitude * (friis / d_br) * rng.unit_phasor();
  g.g_bu = (friis / d_bu) * rng.unit_phasor();
  g.g_bru = cascade_amplitude(cfg, d_br, d_ru) * rng.unit_phasor();
  return g;
}

std::vector<ScatterPoint> draw_scatter_points(int count, double rcs, Rng& rng) {
  std::vector<ScatterPoint> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    ScatterPoint sp;
    sp.position = Eigen::Vector2d(rng.uniform(8.0, 13.0), 5.0);
    sp.rcs = rcs;
    points.push_back(sp);
  }
  return points;
}

SignalParts signal_parts(const ChannelParams& params, const SystemConfig& cfg,
                         const CodebookSet& books) {
  validate_config(cfg);
  double pt = cfg.pt_mw();
  Eigen::VectorXcd a_b_br = ula_steering(params.theta_br, cfg.n_bs_antennas);
  Eigen::VectorXcd a_b_bu = ula_steering(params.theta_bu, cfg.n_bs_antennas);
  Eigen::VectorXcd a_r_rb = ula_steering(params.phi_rb, cfg.n_ris_elements);
  Eigen::VectorXcd a_r_ru = ula_steering(params.theta_ru, cfg.n_ris_elements);

  // Per-slot scalars seen through the codebooks.
  Eigen::VectorXcd bs_to_ris = books.precoders.transpose() * a_b_br;
  Eigen::VectorXcd bs_to_ue = books.precoders.transpose() * a_b_bu;
  Eigen::VectorXcd combined = books.combiners.transpose() * a_r_rb;
  Eigen::VectorXcd cascade_elem = a_r_ru.cwiseProduct(a_r_rb);
  Eigen::VectorXcd reflected = books.profiles.transpose() * cascade_elem;

  SignalParts parts;
  parts.ris =
      delay_steering(params.tau_br, cfg.n_subcarriers, cfg.delta_f) *
      (params.g_br * std::sqrt(cfg.rho * pt) *
       combined.cwiseProduct(bs_to_ris))
          .transpose();
  parts.ue_los =
      delay_steering(params.tau_bu, cfg.n_subcarriers, cfg.delta_f) *
      (params.g_bu * std::sqrt(pt) * bs_to_ue).transpose();
  parts.ue_cascade =
      delay_steering(params.tau_bru, cfg.n_subcarriers, cfg.delta_f) *
      (params.g_bru * std::sqrt((1.0 - cfg.rho) * pt) *
       reflected.cwiseProduct(bs_to_ris))
          .transpose();
  return parts;
}

Eigen::MatrixXcd clutter_component(const SceneState& scene,
                                   const SystemConfig& cfg,
                                   const CodebookSet& books,
                                   const std::vector<ScatterPoint>& points,
                                   Rng& rng) {
  Eigen::MatrixXcd clutter =
      Eigen::MatrixXcd::Zero(cfg.n_subcarriers, cfg.n_transmissions);
  double pt = cfg.pt_mw();
  for (const ScatterPoint& sp : points) {
    auto [theta_sp, d_b_sp] = direction_and_distance(scene.p_b, sp.position,
                                                     0.0, AngleSense::kClockwise);
    double d_sp_u = (scene.p_u - sp.position).norm();
    if (!(d_sp_u > 0.0)) {
      throw Error(ErrorKind::kDegenerateGeometry,
                  "clutter: scatter point coincides with the user");
    }
    double tau_sp = (d_b_sp + d_sp_u) / cfg.c + scene.b_u;
    if (tau_sp >= 1.0 / cfg.delta_f) {
      throw Error(ErrorKind::kConfig, "clutter: delay exceeds unambiguous range");
    }
    double mag = cfg.lambda * std::sqrt(sp.rcs) /
                 (std::pow(4.0 * kPi, 1.5) * d_b_sp * d_sp_u);
    std::complex<double> g_sp = mag * rng.unit_phasor();
    Eigen::VectorXcd beams =
        books.precoders.transpose() * ula_steering(theta_sp, cfg.n_bs_antennas);
    clutter += delay_steering(tau_sp, cfg.n_subcarriers, cfg.delta_f) *
               (g_sp * std::sqrt(pt) * beams).transpose();
  }
  return clutter;
}

ObservationSet synth_with_params(const ChannelParams& params,
                                 const SceneState& scene,
                                 const SystemConfig& cfg,
                                 const CodebookSet& books,
                                 const std::vector<ScatterPoint>& points,
                                 Rng& rng, bool noiseless) {
  SignalParts parts = signal_parts(params, cfg, books);
  ObservationSet obs;
  obs.y_ris = parts.ris;
  obs.y_ue = parts.ue_los + parts.ue_cascade;
  if (!points.empty()) {
    obs.y_ue += clutter_component(scene, cfg, books, points, rng);
  }
  if (!noiseless) {
    double var = noise_variance_mw(cfg);
    for (int t = 0; t < obs.y_ris.cols(); ++t)
      for (int n = 0; n < obs.y_ris.rows(); ++n) obs.y_ris(n, t) += rng.cgauss(var);
    for (int t = 0; t < obs.y_ue.cols(); ++t)
      for (int n = 0; n < obs.y_ue.rows(); ++n) obs.y_ue(n, t) += rng.cgauss(var);
  }
  return obs;
}

ObservationSet synth_observations(const SceneState& scene,
                                  const SystemConfig& cfg,
                                  const CodebookSet& books,
                                  const std::vector<ScatterPoint>& points,
                                  Rng& rng, bool noiseless) {
  ChannelParams params = channel_params_from_state(scene, cfg, rng);
  return synth_with_params(params, scene, cfg, books, points, rng, noiseless);
}

}  // namespace hrisloc
