#include "hrisloc/bounds.hpp"

#include <cmath>

namespace hrisloc {

namespace {

constexpr double kDelayStep = 1e-13;
constexpr double kAngleStep = 1e-7;
constexpr double kGainStep = 1e-6;

double get_param(const ChannelParams& p, int k) {
  switch (k) {
    case 0: return p.tau_br;
    case 1: return p.tau_bu;
    case 2: return p.tau_bru;
    case 3: return p.theta_br;
    case 4: return p.theta_bu;
    case 5: return p.theta_ru;
    case 6: return p.phi_rb;
    case 7: return p.g_br.real();
    case 8: return p.g_br.imag();
    case 9: return p.g_bu.real();
    case 10: return p.g_bu.imag();
    case 11: return p.g_bru.real();
    default: return p.g_bru.imag();
  }
}

void set_param(ChannelParams& p, int k, double v) {
  switch (k) {
    case 0: p.tau_br = v; break;
    case 1: p.tau_bu = v; break;
    case 2: p.tau_bru = v; break;
    case 3: p.theta_br = v; break;
    case 4: p.theta_bu = v; break;
    case 5: p.theta_ru = v; break;
    case 6: p.phi_rb = v; break;
    case 7: p.g_br.real(v); break;
    case 8: p.g_br.imag(v); break;
    case 9: p.g_bu.real(v); break;
    case 10: p.g_bu.imag(v); break;
    case 11: p.g_bru.real(v); break;
    default: p.g_bru.imag(v); break;
  }
}

double param_step(int k) {
  if (k < 3) return kDelayStep;
  if (k < 7) return kAngleStep;
  return kGainStep;
}

Eigen::VectorXcd stacked_mean(const ChannelParams& p, const SystemConfig& cfg,
                              const CodebookSet& books) {
  SignalParts parts = signal_parts(p, cfg, books);
  int block = static_cast<int>(parts.ris.size());
  Eigen::VectorXcd mu(3 * block);
  mu.segment(0, block) = Eigen::Map<const Eigen::VectorXcd>(
      parts.ris.data(), block);
  mu.segment(block, block) = Eigen::Map<const Eigen::VectorXcd>(
      parts.ue_los.data(), block);
  mu.segment(2 * block, block) = Eigen::Map<const Eigen::VectorXcd>(
      parts.ue_cascade.data(), block);
  return mu;
}

// Inverse through the eigendecomposition with a relative rank cutoff.
// Mixed units (seconds vs radians vs gain) make the raw condition number
// meaningless, so rows/columns are rescaled to unit diagonal first.
Eigen::MatrixXd guarded_inverse(const Eigen::MatrixXd& m, ErrorKind kind,
                                const char* what) {
  if (!(m.diagonal().minCoeff() > 0.0)) throw Error(kind, what);
  Eigen::VectorXd s = m.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd scaled = s.asDiagonal() * m * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  if (eig.info() != Eigen::Success) throw Error(kind, what);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (!(ev.maxCoeff() > 0.0) || ev.minCoeff() <= 1e-12 * ev.maxCoeff()) {
    throw Error(kind, what);
  }
  Eigen::MatrixXd inv_scaled = eig.eigenvectors() *
                               ev.cwiseInverse().asDiagonal() *
                               eig.eigenvectors().transpose();
  return s.asDiagonal() * inv_scaled * s.asDiagonal();
}

}  // namespace

Eigen::MatrixXd fim_channel(const SceneState& scene, const SystemConfig& cfg,
                            const CodebookSet& books, const PathGains& gains) {
  validate_config(cfg);
  validate_scene(scene, cfg);
  ChannelParams base = channel_geometry_from_state(scene, cfg);
  base.g_br = gains.g_br;
  base.g_bu = gains.g_bu;
  base.g_bru = gains.g_bru;

  int rows = 3 * cfg.n_subcarriers * cfg.n_transmissions;
  Eigen::MatrixXcd jac(rows, kNumChannelParams);
  for (int k = 0; k < kNumChannelParams; ++k) {
    double h = param_step(k);
    ChannelParams plus = base, minus = base;
    set_param(plus, k, get_param(base, k) + h);
    set_param(minus, k, get_param(base, k) - h);
    jac.col(k) = (stacked_mean(plus, cfg, books) -
                  stacked_mean(minus, cfg, books)) /
                 (2.0 * h);
  }
  if (!jac.allFinite()) {
    throw Error(ErrorKind::kIllPosed, "fim_channel: non-finite derivative");
  }
  Eigen::MatrixXd fim =
      (2.0 / noise_variance_mw(cfg)) * (jac.adjoint() * jac).real();
  // Symmetrize away accumulation-order asymmetry.
  return 0.5 * (fim + fim.transpose());
}

ChannelBounds crb_channel(const Eigen::MatrixXd& fim) {
  if (fim.rows() != kNumChannelParams || fim.cols() != kNumChannelParams) {
    throw Error(ErrorKind::kConfig, "crb_channel: FIM size mismatch");
  }
  ChannelBounds out;
  out.crb = guarded_inverse(fim, ErrorKind::kIllPosed,
                            "crb_channel: singular FIM");
  out.teb_br = std::sqrt(out.crb(0, 0));
  out.teb_bu = std::sqrt(out.crb(1, 1));
  out.teb_bru = std::sqrt(out.crb(2, 2));
  out.aeb_theta_br = std::sqrt(out.crb(3, 3));
  out.aeb_theta_bu = std::sqrt(out.crb(4, 4));
  out.aeb_theta_ru = std::sqrt(out.crb(5, 5));
  out.aeb_phi_rb = std::sqrt(out.crb(6, 6));
  return out;
}

Eigen::MatrixXd state_jacobian(const SceneState& scene, double c) {
  Eigen::Vector2d d_br = scene.p_r - scene.p_b;   // BS -> HRIS
  Eigen::Vector2d d_bu = scene.p_u - scene.p_b;   // BS -> user
  Eigen::Vector2d d_ru = scene.p_u - scene.p_r;   // HRIS -> user
  double r_br = d_br.norm(), r_bu = d_bu.norm(), r_ru = d_ru.norm();

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(kNumGeometricParams,
                                            kNumStateParams);
  // tau_br = r_br / c + b_r
  t(0, 0) = d_br.x() / (c * r_br);
  t(0, 1) = d_br.y() / (c * r_br);
  t(0, 5) = 1.0;
  // tau_bu = r_bu / c + b_u
  t(1, 3) = d_bu.x() / (c * r_bu);
  t(1, 4) = d_bu.y() / (c * r_bu);
  t(1, 6) = 1.0;
  // tau_bru = (r_br + r_ru) / c + b_u
  t(2, 0) = (d_br.x() / r_br - d_ru.x() / r_ru) / c;
  t(2, 1) = (d_br.y() / r_br - d_ru.y() / r_ru) / c;
  t(2, 3) = d_ru.x() / (c * r_ru);
  t(2, 4) = d_ru.y() / (c * r_ru);
  t(2, 6) = 1.0;
  // theta_br = pi/2 - atan2(d_br.y, d_br.x)   (clockwise BS frame)
  t(3, 0) = d_br.y() / (r_br * r_br);
  t(3, 1) = -d_br.x() / (r_br * r_br);
  // theta_bu likewise from d_bu
  t(4, 3) = d_bu.y() / (r_bu * r_bu);
  t(4, 4) = -d_bu.x() / (r_bu * r_bu);
  // theta_ru = atan2(d_ru.y, d_ru.x) - alpha - pi/2  (counter-clockwise HRIS
  // frame); d_ru depends on p_u - p_r.
  t(5, 0) = d_ru.y() / (r_ru * r_ru);
  t(5, 1) = -d_ru.x() / (r_ru * r_ru);
  t(5, 2) = -1.0;
  t(5, 3) = -d_ru.y() / (r_ru * r_ru);
  t(5, 4) = d_ru.x() / (r_ru * r_ru);
  // phi_rb from -d_br; derivative w.r.t. p_r flips sign twice except the
  // atan2 argument is p_b - p_r.
  t(6, 0) = -d_br.y() / (r_br * r_br);
  t(6, 1) = d_br.x() / (r_br * r_br);
  t(6, 2) = -1.0;
  return t;
}

BoundReport crb_state(const Eigen::MatrixXd& fim, const SceneState& scene,
                      double c) {
  BoundReport out;
  out.channel = crb_channel(fim);

  // Marginalize the gain coordinates: EFIM on the geometric block.
  constexpr int ng = kNumGeometricParams;
  constexpr int kGainCoords = kNumChannelParams - ng;
  Eigen::MatrixXd f_gg = fim.block(0, 0, ng, ng);
  Eigen::MatrixXd f_ga = fim.block(0, ng, ng, kGainCoords);
  Eigen::MatrixXd f_aa = fim.block(ng, ng, kGainCoords, kGainCoords);
  Eigen::MatrixXd f_aa_inv = guarded_inverse(
      f_aa, ErrorKind::kIllPosed, "crb_state: singular gain block");
  Eigen::MatrixXd efim = f_gg - f_ga * f_aa_inv * f_ga.transpose();

  Eigen::MatrixXd t = state_jacobian(scene, c);
  Eigen::MatrixXd f_state = t.transpose() * efim * t;
  f_state = 0.5 * (f_state + f_state.transpose());
  Eigen::MatrixXd crb = guarded_inverse(
      f_state, ErrorKind::kUnidentifiable, "crb_state: rank-deficient state FIM");
  out.peb_r = std::sqrt(crb(0, 0) + crb(1, 1));
  out.oeb = std::sqrt(crb(2, 2));
  out.peb_u = std::sqrt(crb(3, 3) + crb(4, 4));
  out.beb_r = std::sqrt(crb(5, 5));
  out.beb_u = std::sqrt(crb(6, 6));
  return out;
}

BoundReport bound_report(const SceneState& scene, const SystemConfig& cfg,
                         const CodebookSet& books, const PathGains& gains) {
  return crb_state(fim_channel(scene, cfg, books, gains), scene, cfg.c);
}

}  // namespace hrisloc
