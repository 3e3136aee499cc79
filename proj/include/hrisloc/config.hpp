#pragma once

#include "hrisloc/common.hpp"

namespace hrisloc {

// Radio and array configuration. Defaults are the reference setup used by the
// benchmarks; powers are handled internally in milliwatts.
struct SystemConfig {
  double lambda = 0.01;             // carrier wavelength [m]
  double c = 3e8;                   // propagation speed [m/s]
  int n_subcarriers = 100;          // N_c
  int n_transmissions = 32;         // T
  double delta_f = 120e3;           // subcarrier spacing [Hz]
  double noise_psd_dbm_hz = -174.0; // N_0
  double noise_figure_db = 5.0;     // n_f
  int spectral_grid = 1024;         // N_F, delay-domain grid size
  int n_bs_antennas = 17;           // M_B
  int n_ris_elements = 33;          // M_R
  double pt_dbm = 0.0;              // transmit power
  double rho = 0.5;                 // HRIS power split toward its RF chain

  double element_spacing() const { return lambda / 2.0; }
  double pt_mw() const { return db_to_linear(pt_dbm); }
};

// Throws Error{kConfig} naming the offending field.
void validate_config(const SystemConfig& cfg);

}  // namespace hrisloc
