#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "hrisloc/codebooks.hpp"
#include "hrisloc/common.hpp"
#include "hrisloc/config.hpp"
#include "hrisloc/scene.hpp"

namespace hrisloc {

// Frequency-domain delay signature: entry n = exp(-j 2 pi n delta_f tau).
Eigen::VectorXcd delay_steering(double tau, int n_subcarriers, double delta_f);

// Phase-centered half-wavelength ULA steering vector: entry m =
// exp(-j pi sin(angle) (m - (M-1)/2)).
Eigen::VectorXcd ula_steering(double angle, int n_elements);

// Per-entry complex noise variance in mW: N_0 * n_f (linear, mW/Hz) * N_c *
// delta_f.
double noise_variance_mw(const SystemConfig& cfg);

struct PathGains {
  std::complex<double> g_br{0.0, 0.0};
  std::complex<double> g_bu{0.0, 0.0};
  std::complex<double> g_bru{0.0, 0.0};
};

// Link amplitude model. The BS-user link carries the free-space amplitude
// lambda/(4 pi d). The reflected BS-panel-user link carries
// kPanelAggregation * lambda^2 / ((4 pi)^2 d_br d_ru), a partial-refocusing
// aperture gain sitting between the flat-panel backscatter value (pi M_R)
// and the ideal two-way limit (pi M_R)^2. The sensing port sits behind the
// per-element power splitters and a long single-RF-chain combining feed; its
// net amplitude efficiency is kSensePortAmplitude on top of free space.
// These relative budgets place the power-split trade-off inside rho in
// (0, 1): starving the sensing port collapses the panel-side bearings,
// starving the reflection collapses the user-side ranging, and neither end
// can compensate for the other.
// Phases are uniform, drawn in order br, bu, bru.
inline constexpr double kSensePortAmplitude = 0.0175;
inline constexpr double kPanelAggregation = 550.0;

PathGains path_gains(const SceneState& scene, const SystemConfig& cfg, Rng& rng);

// Amplitude of the reflected link: kPanelAggregation * lambda^2 /
// ((4 pi)^2 d_br d_ru).
double cascade_amplitude(const SystemConfig& cfg, double d_br, double d_ru);

// Discrete point scatterer adding an extra geometric path to the user link.
struct ScatterPoint {
  Eigen::Vector2d position{0.0, 0.0};
  double rcs = 0.1;  // [m^2]
};

// Scatterers on the y = 5 line with x ~ U(8, 13).
std::vector<ScatterPoint> draw_scatter_points(int count, double rcs, Rng& rng);

// Noiseless signal components, N_c x T each.
struct SignalParts {
  Eigen::MatrixXcd ris;           // HRIS RF-chain output
  Eigen::MatrixXcd ue_los;        // direct BS -> user component
  Eigen::MatrixXcd ue_cascade;    // BS -> HRIS -> user component
};

SignalParts signal_parts(const ChannelParams& params, const SystemConfig& cfg,
                         const CodebookSet& books);

// Uncontrolled scatter-point contribution to the user observation. Draws one
// uniform phase per scatterer (in order).
Eigen::MatrixXcd clutter_component(const SceneState& scene,
                                   const SystemConfig& cfg,
                                   const CodebookSet& books,
                                   const std::vector<ScatterPoint>& points,
                                   Rng& rng);

struct ObservationSet {
  Eigen::MatrixXcd y_ris;  // N_c x T
  Eigen::MatrixXcd y_ue;   // N_c x T
};

// Assemble both observations for already-drawn channel parameters. Draw order:
// clutter phases, then noise for y_ris (column-major), then noise for y_ue.
ObservationSet synth_with_params(const ChannelParams& params,
                                 const SceneState& scene,
                                 const SystemConfig& cfg,
                                 const CodebookSet& books,
                                 const std::vector<ScatterPoint>& points,
                                 Rng& rng, bool noiseless);

// Draws gains via channel_params_from_state, then synthesizes. Same seed and
// inputs give a bit-identical ObservationSet.
ObservationSet synth_observations(const SceneState& scene,
                                  const SystemConfig& cfg,
                                  const CodebookSet& books,
                                  const std::vector<ScatterPoint>& points,
                                  Rng& rng, bool noiseless);

}  // namespace hrisloc
