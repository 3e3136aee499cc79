#include "hrisloc/scene.hpp"

#include <cmath>

#include "hrisloc/waveform.hpp"

namespace hrisloc {

std::pair<double, double> direction_and_distance(const Eigen::Vector2d& from,
                                                 const Eigen::Vector2d& to,
                                                 double frame_rotation,
                                                 AngleSense sense) {
  Eigen::Vector2d delta = to - from;
  double dist = delta.norm();
  if (!(dist > 0.0)) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "direction_and_distance: coincident points");
  }
  double psi = std::atan2(delta.y(), delta.x());  // global polar angle
  double nu = (sense == AngleSense::kClockwise)
                  ? kPi / 2.0 + frame_rotation - psi
                  : psi - frame_rotation - kPi / 2.0;
  return {wrap_pi(nu), dist};
}

void validate_scene(const SceneState& scene, const SystemConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kConfig, std::string("scene: ") + what);
  };
  double d_br = (scene.p_r - scene.p_b).norm();
  double d_bu = (scene.p_u - scene.p_b).norm();
  double d_ru = (scene.p_u - scene.p_r).norm();
  require(d_br > 0.0, "p_r coincides with p_b");
  require(d_bu > 0.0, "p_u coincides with p_b");
  require(d_ru > 0.0, "p_u coincides with p_r");
  require(scene.alpha > -kPi && scene.alpha <= kPi, "alpha outside (-pi, pi]");
  require(scene.b_r >= 0.0, "b_r negative");
  require(scene.b_u >= 0.0, "b_u negative");
  double range = 1.0 / cfg.delta_f;
  require(d_br / cfg.c + scene.b_r < range, "tau_br exceeds unambiguous range");
  require(d_bu / cfg.c + scene.b_u < range, "tau_bu exceeds unambiguous range");
  require((d_br + d_ru) / cfg.c + scene.b_u < range,
          "tau_bru exceeds unambiguous range");
  double cross = (scene.p_r - scene.p_b).x() * (scene.p_u - scene.p_b).y() -
                 (scene.p_r - scene.p_b).y() * (scene.p_u - scene.p_b).x();
  require(std::abs(cross) / (d_br * d_bu) > 1e-9, "collinear nodes");
}

ChannelParams channel_geometry_from_state(const SceneState& scene,
                                          const SystemConfig& cfg) {
  validate_scene(scene, cfg);
  ChannelParams p;
  auto [theta_br, d_br] =
      direction_and_distance(scene.p_b, scene.p_r, 0.0, AngleSense::kClockwise);
  auto [theta_bu, d_bu] =
      direction_and_distance(scene.p_b, scene.p_u, 0.0, AngleSense::kClockwise);
  auto [theta_ru, d_ru] = direction_and_distance(
      scene.p_r, scene.p_u, scene.alpha, AngleSense::kCounterClockwise);
  auto [phi_rb, d_rb] = direction_and_distance(
      scene.p_r, scene.p_b, scene.alpha, AngleSense::kCounterClockwise);
  (void)d_rb;
  p.theta_br = theta_br;
  p.theta_bu = theta_bu;
  p.theta_ru = theta_ru;
  p.phi_rb = phi_rb;
  p.tau_br = d_br / cfg.c + scene.b_r;
  p.tau_bu = d_bu / cfg.c + scene.b_u;
  p.tau_bru = (d_br + d_ru) / cfg.c + scene.b_u;
  return p;
}

ChannelParams channel_params_from_state(const SceneState& scene,
                                        const SystemConfig& cfg, Rng& rng) {
  ChannelParams p = channel_geometry_from_state(scene, cfg);
  PathGains g = path_gains(scene, cfg, rng);
  p.g_br = g.g_br;
  p.g_bu = g.g_bu;
  p.g_bru = g.g_bru;
  return p;
}

std::pair<double, double> triangle_solve(double d_hat, double theta_br,
                                         double theta_bu, double theta_ru,
                                         double phi_rb) {
  if (!(d_hat > 0.0)) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "triangle_solve: non-positive excess path length");
  }
  double beta0 = std::abs(wrap_pi(theta_br - theta_bu));  // vertex at BS
  double beta1 = std::abs(wrap_pi(phi_rb - theta_ru));    // vertex at HRIS
  double beta2 = kPi - beta0 - beta1;                     // vertex at user
  constexpr double kAngleTol = 1e-6;
  if (beta0 < kAngleTol || beta1 < kAngleTol) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "triangle_solve: collapsed vertex angle");
  }
  if (beta2 < kAngleTol) {
    throw Error(ErrorKind::kInconsistentAngles,
                "triangle_solve: angles do not close a triangle");
  }
  double denom = std::sin(beta0) + std::sin(beta2) - std::sin(beta1);
  if (denom < 1e-12) {
    throw Error(ErrorKind::kInconsistentAngles,
                "triangle_solve: vanishing excess-length denominator");
  }
  double d_bu = d_hat * std::sin(beta1) / denom;
  double d_br = d_hat * std::sin(beta2) / denom;
  return {d_bu, d_br};
}

SceneEstimate state_from_channel_params(const ChannelParams& est,
                                        const Eigen::Vector2d& p_b, double c) {
  double d_hat = c * (est.tau_bru - est.tau_bu);
  auto [d_bu, d_br] =
      triangle_solve(d_hat, est.theta_br, est.theta_bu, est.theta_ru, est.phi_rb);
  auto unit = [](double theta) {
    return Eigen::Vector2d(std::sin(theta), std::cos(theta));
  };
  SceneEstimate out;
  out.d_bu = d_bu;
  out.d_br = d_br;
  out.p_r = p_b + d_br * unit(est.theta_br);
  out.p_u = p_b + d_bu * unit(est.theta_bu);
  out.alpha = wrap_pi(kPi - est.theta_br - est.phi_rb);
  out.b_r = est.tau_br - d_br / c;
  out.b_u = est.tau_bu - d_bu / c;
  out.negative_bias = out.b_r < 0.0 || out.b_u < 0.0;
  return out;
}

}  // namespace hrisloc
