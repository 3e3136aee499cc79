#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "hrisloc/codebooks.hpp"
#include "hrisloc/common.hpp"
#include "hrisloc/config.hpp"
#include "hrisloc/scene.hpp"
#include "hrisloc/waveform.hpp"

namespace hrisloc {

struct EstimatorConfig {
  int spectral_grid = 1024;     // delay-domain FFT size, >= N_c
  int angle_grid_points = 2048; // fine grid on (-pi/2, pi/2)
  int joint_grid_points = 192;  // per-axis joint 2D grid for the panel link
  int toa_candidates = 5;       // delay hypotheses scored by the angle fit
  int angle_starts = 4;         // refinement starts on the joint 2D surface
  int newton_max_iters = 50;
  double newton_tol = 1e-10;    // step-size stopping threshold [rad]
  double fd_step = 1e-6;        // central-difference step for derivatives [rad]
  // Alternating LOS/cascade re-estimation rounds on the user observation
  // (the two arrivals overlap in delay, so the one-shot fits bias each
  // other). Refined values feed state recovery only; the one-shot values
  // are reported as the channel estimates.
  int refine_rounds = 8;
  double refine_tol_tau = 1e-16;   // early-exit delta [s]
  double refine_tol_angle = 1e-12; // early-exit delta [rad]
};

struct StageDiag {
  // Profiled residual at the coarse-grid point the refinement starts from,
  // and at the returned optimum; refinement never increases it.
  double coarse_residual = 0.0;
  double refined_residual = 0.0;
  int iterations = 0;
};

// Peak of the delay-domain periodogram summed over slots: coarse FFT grid,
// three-point quadratic interpolation of the log-periodogram, then a damped
// Newton polish of the continuous periodogram. Result lies in [0, 1/delta_f).
double estimate_toa(const Eigen::MatrixXcd& y, int spectral_grid,
                    double delta_f);

// Up to max_candidates polished delays at cyclic local maxima of the
// periodogram, strongest first. estimate_toa is the first entry; the rest
// back the multi-hypothesis sensing stage near the detection threshold.
std::vector<double> toa_candidate_delays(const Eigen::MatrixXcd& y,
                                         int spectral_grid, double delta_f,
                                         int max_candidates);

// Rotate out a delay and sum across subcarriers: out[t] = sum_n y(n,t) *
// exp(+j 2 pi n delta_f tau_hat).
Eigen::VectorXcd collapse_delay(const Eigen::MatrixXcd& y, double tau_hat,
                                double delta_f);

struct BsHrisAngles {
  double phi_rb = 0.0;
  double theta_br = 0.0;
  std::complex<double> g_br{0.0, 0.0};
  StageDiag diag;
};

// Joint arrival/departure estimation on the sensing link: profile the
// beamspace response over phi on the coarse grid, then the departure angle,
// then refine both with a damped Newton on the scalar-profiled residual.
// phi_rb is reported in the HRIS back half-range (see scene.hpp on the HRIS
// angle sense); theta_br stays in (-pi/2, pi/2). Uses cfg for the power
// split, transmit power and array sizes.
BsHrisAngles estimate_bs_hris_angles(const Eigen::VectorXcd& y1_ris,
                                     const Eigen::MatrixXcd& omega,
                                     const SystemConfig& cfg,
                                     const EstimatorConfig& est);

struct LosAngle {
  double theta_bu = 0.0;
  std::complex<double> g_bu{0.0, 0.0};
  StageDiag diag;
};

// Departure angle of the direct user link from the collapsed observation,
// treating the cascade as residual interference.
LosAngle estimate_theta_bu(const Eigen::VectorXcd& y0_ue,
                           const Eigen::MatrixXcd& precoders, double pt_mw,
                           int n_subcarriers, const EstimatorConfig& est);

// Remove the reconstructed direct component from the user observation.
Eigen::MatrixXcd subtract_los(const Eigen::MatrixXcd& y_ue, double theta_bu,
                              std::complex<double> g_bu, double tau_bu,
                              const Eigen::MatrixXcd& precoders, double pt_mw,
                              double delta_f);

struct CascadeAngle {
  double theta_ru = 0.0;
  // BS departure angle re-fit against the cascade observation. The reflected
  // link outweighs the sensing port on this parameter, so the joint refit is
  // what brings theta_BR near its bound; theta_br below starts from the
  // stage-1 value and stays on the BS face.
  double theta_br = 0.0;
  // Profiled compound amplitude g_bru * sqrt((1-rho) P_t) * N_c.
  std::complex<double> g_scaled{0.0, 0.0};
  StageDiag diag;
};

// Departure angle toward the user from the collapsed cascade observation,
// plus a joint polish of the BS departure angle seeded at theta_br. phi_rb
// stays fixed (the panel-side split is stage-1 information only); theta_ru is
// reported on the same face of the panel as phi_rb.
CascadeAngle estimate_theta_ru(const Eigen::VectorXcd& y1_ue,
                               const Eigen::MatrixXcd& xi, double theta_br,
                               double phi_rb, const SystemConfig& cfg,
                               const EstimatorConfig& est);

struct ChannelEstimates {
  // Reported estimates: sensing-link values from stage 1; each user-link
  // side re-fit once against the other side's reconstruction (direct path
  // against the provisional cascade fit, cascade against that re-fit direct
  // path). Every user-link value keeps the residual cross-path error of a
  // single cancellation pass, which grows relative to the noise floor at
  // high transmit power.
  ChannelParams params;
  // After the alternating re-estimation rounds; used for state recovery.
  ChannelParams refined;
  int refine_rounds_used = 0;
  StageDiag bs_hris, bs_ue, cascade;  // diagnostics of the one-shot fits
};

struct PipelineResult {
  ChannelEstimates channel;
  SceneEstimate scene;
};

// Full three-stage pipeline: sensing link (tau_br, phi_rb, theta_br), direct
// user link (tau_bu, theta_bu), cascade after LOS removal (tau_bru, theta_ru),
// then geometric state recovery. `books` must be the set the receivers
// applied when the observations were formed.
PipelineResult run_pipeline(const ObservationSet& obs, const CodebookSet& books,
                            const SystemConfig& cfg, const EstimatorConfig& est,
                            const Eigen::Vector2d& p_b);

}  // namespace hrisloc
