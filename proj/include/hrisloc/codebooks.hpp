#pragma once

#include <Eigen/Dense>

#include "hrisloc/common.hpp"
#include "hrisloc/config.hpp"

namespace hrisloc {

// Per-transmission codebooks. Column t holds the BS precoder f_t, the HRIS
// reflection profile gamma_t and the HRIS combiner c_t used in slot t.
struct CodebookSet {
  Eigen::MatrixXcd precoders;  // M_B x T, unit-norm DFT columns, cycled t % M_B
  Eigen::MatrixXcd profiles;   // M_R x T, i.i.d. unit-modulus random phases
  Eigen::MatrixXcd combiners;  // M_R x T, i.i.d. unit-modulus random phases
};

// Profiles are drawn before combiners, column-major within each.
CodebookSet build_codebooks(const SystemConfig& cfg, Rng& rng);

// Stacked measurement matrix of the sensing link, (M_B*M_R) x T with column t
// equal to f_t (x) c_t, so that omega^T vec(a_r a_b^T) collects the per-slot
// scalars (c_t^T a_r)(a_b^T f_t).
Eigen::MatrixXcd assemble_omega(const Eigen::MatrixXcd& precoders,
                                const Eigen::MatrixXcd& combiners);

// Same structure for the reflected link: column t equals f_t (x) gamma_t.
Eigen::MatrixXcd assemble_xi(const Eigen::MatrixXcd& precoders,
                             const Eigen::MatrixXcd& profiles);

}  // namespace hrisloc
