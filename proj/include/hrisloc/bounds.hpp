#pragma once

#include <Eigen/Dense>

#include "hrisloc/codebooks.hpp"
#include "hrisloc/config.hpp"
#include "hrisloc/scene.hpp"
#include "hrisloc/waveform.hpp"

namespace hrisloc {

// Index layout of the channel parameter vector the FIM is taken over:
// [tau_br, tau_bu, tau_bru, theta_br, theta_bu, theta_ru, phi_rb,
//  Re g_br, Im g_br, Re g_bu, Im g_bu, Re g_bru, Im g_bru].
inline constexpr int kNumChannelParams = 13;
inline constexpr int kNumGeometricParams = 7;
inline constexpr int kNumStateParams = 7;  // p_R, alpha, p_U, b_R, b_U

struct ChannelBounds {
  double teb_br = 0.0;   // [s]
  double teb_bu = 0.0;
  double teb_bru = 0.0;
  double aeb_theta_br = 0.0;  // [rad]
  double aeb_theta_bu = 0.0;
  double aeb_theta_ru = 0.0;
  double aeb_phi_rb = 0.0;
  Eigen::MatrixXd crb;  // full 13x13 CRB matrix
};

struct BoundReport {
  ChannelBounds channel;
  double peb_r = 0.0;  // HRIS position [m]
  double peb_u = 0.0;  // user position [m]
  double oeb = 0.0;    // orientation [rad]
  double beb_r = 0.0;  // HRIS clock bias [s]
  double beb_u = 0.0;  // user clock bias [s]
};

// Fisher information of the stacked noiseless observation components (sensing
// link, direct user link, cascade) under i.i.d. circular complex noise of
// per-entry variance sigma^2: FIM = (2/sigma^2) Re{J^H J}, with J the central
// finite-difference Jacobian of the stacked mean w.r.t. the 13 channel
// parameters (steps: 1e-13 s delays, 1e-7 rad angles, 1e-6 gain coordinates).
// The three components enter as separately observed blocks, so parameters of
// disjoint links carry no cross information.
Eigen::MatrixXd fim_channel(const SceneState& scene, const SystemConfig& cfg,
                            const CodebookSet& books, const PathGains& gains);

// Square roots of the geometric diagonal entries of the FIM inverse. Throws
// Error{kIllPosed} when the FIM is numerically singular (e.g. rho in {0,1}).
ChannelBounds crb_channel(const Eigen::MatrixXd& fim);

// d(channel geometric params)/d(state) at the true scene; rows follow the
// geometric-parameter order above, columns are [p_Rx, p_Ry, alpha, p_Ux,
// p_Uy, b_R, b_U].
Eigen::MatrixXd state_jacobian(const SceneState& scene, double c);

// State-level bounds: gains marginalized out of the channel FIM by Schur
// complement, then the equivalent FIM is transformed through the analytic
// state Jacobian and inverted. Throws Error{kUnidentifiable} when the state
// FIM is rank deficient.
BoundReport crb_state(const Eigen::MatrixXd& fim, const SceneState& scene,
                      double c);

// Convenience: FIM -> full report for one scene.
BoundReport bound_report(const SceneState& scene, const SystemConfig& cfg,
                         const CodebookSet& books, const PathGains& gains);

}  // namespace hrisloc
