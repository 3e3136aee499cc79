#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>

#include "hrisloc/common.hpp"
#include "hrisloc/config.hpp"

namespace hrisloc {

// Naming shorthand used throughout: b = base station, r = reconfigurable
// surface (HRIS), u = user. Link suffixes: br, bu, ru, rb; "bru" is the
// reflected cascade b -> r -> u.
struct SceneState {
  Eigen::Vector2d p_b{0.0, 0.0};
  Eigen::Vector2d p_r{2.0, 10.0};
  Eigen::Vector2d p_u{6.0, 6.0};
  double alpha = kPi / 6.0;  // HRIS orientation, (-pi, pi]
  double b_r = 0.0;          // HRIS clock bias [s]
  double b_u = 0.0;          // user clock bias [s]
};

// Geometric channel parameters plus complex path gains.
struct ChannelParams {
  double tau_br = 0.0;   // delays [s]
  double tau_bu = 0.0;
  double tau_bru = 0.0;
  double theta_br = 0.0; // BS-frame departure angles [rad]
  double theta_bu = 0.0;
  double theta_ru = 0.0; // HRIS-frame departure angle toward the user
  double phi_rb = 0.0;   // HRIS-frame arrival angle from the BS
  std::complex<double> g_br{0.0, 0.0};
  std::complex<double> g_bu{0.0, 0.0};
  std::complex<double> g_bru{0.0, 0.0};
};

// Recovered global state. d_br/d_bu keep the triangle distances used to place
// the nodes; negative_bias flags a (noise-induced) negative clock bias.
struct SceneEstimate {
  Eigen::Vector2d p_r{0.0, 0.0};
  Eigen::Vector2d p_u{0.0, 0.0};
  double alpha = 0.0;
  double b_r = 0.0;
  double b_u = 0.0;
  double d_br = 0.0;
  double d_bu = 0.0;
  bool negative_bias = false;
};

// Sign sense of broadside angles in a local array frame. The BS measures
// angles clockwise from broadside (+x targets get positive angles); the HRIS
// measures counter-clockwise. With the counter-clockwise sense at the HRIS the
// identity wrap(pi - theta_br - phi_rb - alpha) = 0 holds for every scene,
// which is what state recovery inverts.
enum class AngleSense { kClockwise, kCounterClockwise };

// Broadside angle and distance of the direction from `from` to `to`, in the
// local frame obtained by rotating the global frame CCW by `frame_rotation`.
// Angle is wrapped to (-pi, pi]; |angle| > pi/2 means the target sits behind
// the +y_local face. Throws on coincident points.
std::pair<double, double> direction_and_distance(const Eigen::Vector2d& from,
                                                 const Eigen::Vector2d& to,
                                                 double frame_rotation,
                                                 AngleSense sense);

// Scene invariants: distinct nodes, alpha in (-pi, pi], non-negative biases,
// every path delay plus bias below the unambiguous range 1/delta_f, and the
// three nodes not collinear. Throws Error{kConfig} naming the field.
void validate_scene(const SceneState& scene, const SystemConfig& cfg);

// Delays and angles only (gains left zero). Deterministic in the scene.
ChannelParams channel_geometry_from_state(const SceneState& scene,
                                          const SystemConfig& cfg);

// Geometry plus path gains with phases drawn from `rng`.
ChannelParams channel_params_from_state(const SceneState& scene,
                                        const SystemConfig& cfg, Rng& rng);

// Recover (d_bu, d_br) from the excess cascade length d_hat = d_br + d_ru -
// d_bu and the four angles, via the law of sines on the BS/HRIS/user triangle.
// Throws Error{kDegenerateGeometry} for non-positive d_hat or collapsed vertex
// angles, Error{kInconsistentAngles} when the angles cannot close a triangle.
std::pair<double, double> triangle_solve(double d_hat, double theta_br,
                                         double theta_bu, double theta_ru,
                                         double phi_rb);

// Invert channel parameters to the global state (positions from delays plus
// angles, orientation from the broadside-angle identity, clock biases from the
// delay excess over true range).
SceneEstimate state_from_channel_params(const ChannelParams& est,
                                        const Eigen::Vector2d& p_b,
                                        double c);

}  // namespace hrisloc
