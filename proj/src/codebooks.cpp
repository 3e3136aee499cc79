#include "hrisloc/codebooks.hpp"

namespace hrisloc {

CodebookSet build_codebooks(const SystemConfig& cfg, Rng& rng) {
  int mb = cfg.n_bs_antennas;
  int mr = cfg.n_ris_elements;
  int t_slots = cfg.n_transmissions;
  CodebookSet books;

  books.precoders.resize(mb, t_slots);
  double norm = 1.0 / std::sqrt(static_cast<double>(mb));
  for (int t = 0; t < t_slots; ++t) {
    int col = t % mb;
    for (int m = 0; m < mb; ++m) {
      double phase = -2.0 * kPi * m * col / mb;
      books.precoders(m, t) = std::polar(norm, phase);
    }
  }

  books.profiles.resize(mr, t_slots);
  for (int t = 0; t < t_slots; ++t)
    for (int m = 0; m < mr; ++m) books.profiles(m, t) = std::polar(1.0, rng.angle());

  books.combiners.resize(mr, t_slots);
  for (int t = 0; t < t_slots; ++t)
    for (int m = 0; m < mr; ++m) books.combiners(m, t) = std::polar(1.0, rng.angle());

  return books;
}

static Eigen::MatrixXcd slotwise_kron(const Eigen::MatrixXcd& lhs,
                                      const Eigen::MatrixXcd& rhs) {
  if (lhs.cols() != rhs.cols()) {
    throw Error(ErrorKind::kConfig, "codebooks: slot count mismatch");
  }
  Eigen::MatrixXcd out(lhs.rows() * rhs.rows(), lhs.cols());
  for (int t = 0; t < lhs.cols(); ++t) {
    for (int j = 0; j < lhs.rows(); ++j) {
      out.block(j * rhs.rows(), t, rhs.rows(), 1) = lhs(j, t) * rhs.col(t);
    }
  }
  return out;
}

Eigen::MatrixXcd assemble_omega(const Eigen::MatrixXcd& precoders,
                                const Eigen::MatrixXcd& combiners) {
  return slotwise_kron(precoders, combiners);
}

Eigen::MatrixXcd assemble_xi(const Eigen::MatrixXcd& precoders,
                             const Eigen::MatrixXcd& profiles) {
  return slotwise_kron(precoders, profiles);
}

}  // namespace hrisloc
