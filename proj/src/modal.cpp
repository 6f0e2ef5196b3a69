#include "gridform/modal.hpp"

#include "gridform/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridform {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

// Largest singular value of A; the normalizer for all eigen-residuals.
double spectral_norm(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

// Spectral radius of the inverter relaxation block (-A_33 = m_p K_ii, symmetric
// PSD for valid data); infinite separation when the block vanishes (m_p = 0).
double inverter_radius(const Mat& A, int ng, int ni) {
  if (ni == 0) return 0.0;
  Mat B = -A.block(2 * ng, 2 * ng, ni, ni);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (B + B.transpose().eval()));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Deterministic phase convention: rotate so the largest-magnitude entry
// (lowest index on ties) is real and positive.
template <typename VecT>
void phase_fix(VecT& v) {
  using Scalar = typename VecT::Scalar;
  using RealT = typename Scalar::value_type;
  int arg = 0;
  RealT best = -1.0;
  for (int k = 0; k < v.size(); ++k) {
    const RealT a = std::abs(v(k));
    if (a > best) {
      best = a;
      arg = k;
    }
  }
  if (best <= RealT(0)) return;
  const Scalar rot = std::conj(v(arg)) / std::abs(v(arg));
  v *= rot;
}

Mode make_mode(const StateMatrix& sm, Cplx lambda, const CVec& u_raw,
               const CVec& v_raw, double a_norm, double inv_radius) {
  Mode m;
  m.lambda = lambda;
  m.freq_hz = std::abs(lambda.imag()) / kTwoPi;
  const double mag = std::abs(lambda);
  m.damping = (mag > 0.0) ? std::abs(lambda.real()) / mag : 0.0;

  m.u = u_raw / u_raw.norm();
  m.v = v_raw / v_raw.norm();
  phase_fix(m.u);
  phase_fix(m.v);

  const CMat Ac = sm.A.cast<Cplx>();
  m.residual_right = (Ac * m.u - lambda * m.u).norm() / a_norm;
  m.residual_left = (Ac.transpose() * m.v - lambda * m.v).norm() / a_norm;
  m.vtu_abs = std::abs((m.v.transpose() * m.u)(0, 0));
  m.p_inv = m.u.segment(2 * sm.n_g, sm.n_i).squaredNorm();
  m.slow_ratio = (inv_radius > 0.0) ? mag / inv_radius
                                    : std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace

std::vector<Mode> eigen_modes(const StateMatrix& sm) {
  const int n = static_cast<int>(sm.A.rows());
  Eigen::EigenSolver<Mat> es(sm.A);
  if (es.info() != Eigen::Success)
    throw NumericalError("dense eigensolver failed to converge on the state matrix");
  const CVec lam = es.eigenvalues();
  const CMat V = es.eigenvectors();
  const CMat W = V.inverse();  // rows satisfy w^T A = lambda w^T

  const double a_norm = spectral_norm(sm.A);
  const double inv_radius = inverter_radius(sm.A, sm.n_g, sm.n_i);

  std::vector<bool> used(static_cast<size_t>(n), false);
  std::vector<Mode> modes;
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<size_t>(i)]) continue;
    used[static_cast<size_t>(i)] = true;

    int rep = i;
    if (lam(i).imag() != 0.0) {
      // Find the conjugate partner; the real Schur form produces pairs, so a
      // missing partner means the solve is untrustworthy.
      int match = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = i + 1; j < n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double d = std::abs(lam(j) - std::conj(lam(i)));
        if (d < best) {
          best = d;
          match = j;
        }
      }
      if (match < 0 || best > 1e-8 * std::max(1.0, std::abs(lam(i))))
        throw NumericalError("spectrum is not conjugation-closed near lambda = " +
                             io::fmt_complex(lam(i).real(), lam(i).imag()));
      used[static_cast<size_t>(match)] = true;
      rep = (lam(i).imag() > 0.0) ? i : match;
    }

    modes.push_back(make_mode(sm, lam(rep), V.col(rep), W.row(rep).transpose(),
                              a_norm, inv_radius));
  }

  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.freq_hz != b.freq_hz) return a.freq_hz < b.freq_hz;
    return a.lambda.real() < b.lambda.real();
  });
  for (size_t k = 0; k < modes.size(); ++k) modes[k].mode_id = static_cast<int>(k) + 1;
  return modes;
}

void classify_inter_area(std::vector<Mode>& modes, double f_lo, double f_hi) {
  if (!(f_lo < f_hi))
    throw ValidationError("inter-area band is empty: [" + io::fmt(f_lo) + ", " +
                          io::fmt(f_hi) + "] Hz");
  for (Mode& m : modes) {
    if (m.p_inv > 0.5)
      m.klass = "inverter";
    else if (m.lambda.imag() == 0.0)
      m.klass = "real";
    else if (m.freq_hz >= f_lo && m.freq_hz <= f_hi)
      m.klass = "inter-area";
    else
      m.klass = "local";
  }
}

KernelVectors eigvec_from_kernel(const JacobianSet& jac, const DevicePark& park,
                                 Cplx lambda, double tol) {
  const int ng = jac.n_g;
  const int ni = jac.n_i;
  const bool real_mode = (lambda.imag() == 0.0);

  // --- Newton polish on the smallest singular value of the pencil ---------
  // One Newton step per SVD: with u_s, v_s the extreme singular pair,
  // f(lambda) = u_s^H Lambda v_s has f = sigma_min and f' ~ u_s^H Lambda' v_s,
  // so the increment is well-defined even through the non-smooth |.| of sigma.
  LCplx lam(static_cast<LReal>(lambda.real()), static_cast<LReal>(lambda.imag()));
  LCplx best_lam = lam;
  LReal best_ratio = std::numeric_limits<LReal>::infinity();
  LReal best_second = std::numeric_limits<LReal>::infinity();
  LCMat best_U, best_V;
  int iters = 0;

  for (int it = 0; it < 10; ++it) {
    iters = it + 1;
    LambdaEvalL ev = lambda_matrix_ld(jac, park, lam);
    Eigen::JacobiSVD<LCMat> svd(ev.Lambda, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const LReal smax = sv(0);
    const LReal ratio = sv(ng - 1) / smax;
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best_second = (ng >= 2) ? sv(ng - 2) / smax : std::numeric_limits<LReal>::infinity();
      best_lam = lam;
      best_U = svd.matrixU();
      best_V = svd.matrixV();
    }
    const LCVec us = svd.matrixU().col(ng - 1);
    const LCVec vs = svd.matrixV().col(ng - 1);
    const LCplx num = (us.adjoint() * ev.Lambda * vs)(0, 0);
    const LCplx den = (us.adjoint() * ev.Lambda_prime * vs)(0, 0);
    if (std::abs(den) == 0.0L) break;
    LCplx step = num / den;
    if (real_mode) step = LCplx(step.real(), 0.0L);  // stay on the real axis
    if (std::abs(step) > 1.0L) break;                // diverging; keep best seen
    lam -= step;
    if (std::abs(step) < 1e-13L * std::max<LReal>(1.0L, std::abs(lam))) {
      // Converged: evaluate the final point so `best` can absorb it.
      LambdaEvalL fin = lambda_matrix_ld(jac, park, lam);
      Eigen::JacobiSVD<LCMat> fsvd(fin.Lambda,
                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
      const auto& fsv = fsvd.singularValues();
      const LReal fratio = fsv(ng - 1) / fsv(0);
      if (fratio < best_ratio) {
        best_ratio = fratio;
        best_second =
            (ng >= 2) ? fsv(ng - 2) / fsv(0) : std::numeric_limits<LReal>::infinity();
        best_lam = lam;
        best_U = fsvd.matrixU();
        best_V = fsvd.matrixV();
      }
      break;
    }
  }

  if (!(best_ratio < static_cast<LReal>(tol)))
    throw ValidationError("lambda = " + io::fmt_complex(lambda.real(), lambda.imag()) +
                          " is not on the spectrum (pencil sigma ratio " +
                          io::fmt(static_cast<double>(best_ratio)) + " >= " +
                          io::fmt(tol) + " after polish)");
  if (ng >= 2 && best_second < static_cast<LReal>(tol))
    throw NumericalError("repeated mode at lambda = " +
                         io::fmt_complex(static_cast<double>(best_lam.real()),
                                         static_cast<double>(best_lam.imag())) +
                         " (two pencil singular values below tolerance)");

  // --- lift the kernel directions to full-state eigenvectors --------------
  const LCMat Kig = jac.Kig.cast<LCplx>();
  const LReal mp = static_cast<LReal>(park.mp);
  LCMat res = best_lam * LCMat::Identity(ni, ni) + LCplx(mp) * jac.Kii.cast<LCplx>();
  Eigen::FullPivLU<LCMat> lu(res);

  LCVec us = best_V.col(ng - 1);                 // Lambda u* ~ 0
  LCVec vs = best_U.col(ng - 1).conjugate();     // Lambda^T v* ~ 0

  LCVec u_full(2 * ng + ni);
  u_full.segment(0, ng) = us;
  u_full.segment(ng, ng) = best_lam * us;
  u_full.segment(2 * ng, ni) = -LCplx(mp) * lu.solve(Kig * us);
  u_full /= u_full.norm();
  phase_fix(u_full);

  LCVec v_full(2 * ng + ni);
  for (int k = 0; k < ng; ++k) {
    const LReal dm = static_cast<LReal>(park.D(k)) / static_cast<LReal>(park.M(k));
    v_full(k) = (best_lam + LCplx(dm)) * vs(k);
  }
  v_full.segment(ng, ng) = vs;
  LCVec minv_vs(ng);
  for (int k = 0; k < ng; ++k)
    minv_vs(k) = vs(k) / LCplx(static_cast<LReal>(park.M(k)));
  v_full.segment(2 * ng, ni) = -lu.solve(Kig * minv_vs);
  v_full /= v_full.norm();
  phase_fix(v_full);

  phase_fix(us);
  phase_fix(vs);

  // --- residuals against the assembled state matrix -----------------------
  StateMatrix sm = assemble_state_matrix(jac, park);
  const LCMat A_ld = sm.A.cast<LCplx>();
  const LReal a_norm = static_cast<LReal>(spectral_norm(sm.A));

  KernelVectors kv;
  kv.lambda = Cplx(static_cast<double>(best_lam.real()),
                   static_cast<double>(best_lam.imag()));
  kv.sigma_ratio = static_cast<double>(best_ratio);
  kv.sigma_ratio_second =
      std::isinf(static_cast<double>(best_second)) ? 1.0 : static_cast<double>(best_second);
  kv.residual_right =
      static_cast<double>((A_ld * u_full - best_lam * u_full).norm() / a_norm);
  kv.residual_left = static_cast<double>(
      (A_ld.transpose() * v_full - best_lam * v_full).norm() / a_norm);
  kv.vtu_abs = static_cast<double>(std::abs((v_full.transpose() * u_full)(0, 0)));
  kv.newton_iters = iters;
  kv.u = u_full.cast<Cplx>();
  kv.v = v_full.cast<Cplx>();
  kv.u_star = (us / us.norm()).cast<Cplx>();
  kv.v_star = (vs / vs.norm()).cast<Cplx>();
  return kv;
}

void refine_modes(std::vector<Mode>& modes, const JacobianSet& jac,
                  const DevicePark& park, double tol) {
  for (Mode& m : modes) {
    KernelVectors kv = eigvec_from_kernel(jac, park, m.lambda, tol);
    if (m.lambda.imag() > 0.0 && kv.lambda.imag() < 0.0) {
      // Polish drifted across the axis (possible only for near-real pairs);
      // flip to keep the Im >= 0 representative convention.
      kv.lambda = std::conj(kv.lambda);
      kv.u = kv.u.conjugate();
      kv.v = kv.v.conjugate();
      kv.u_star = kv.u_star.conjugate();
      kv.v_star = kv.v_star.conjugate();
    }
    m.lambda = kv.lambda;
    m.freq_hz = std::abs(kv.lambda.imag()) / kTwoPi;
    const double mag = std::abs(kv.lambda);
    m.damping = (mag > 0.0) ? std::abs(kv.lambda.real()) / mag : 0.0;
    m.u = kv.u;
    m.v = kv.v;
    m.u_star = kv.u_star;
    m.v_star = kv.v_star;
    m.residual_right = kv.residual_right;
    m.residual_left = kv.residual_left;
    m.sigma_ratio = kv.sigma_ratio;
    m.vtu_abs = kv.vtu_abs;
    m.p_inv = kv.u.segment(2 * jac.n_g, jac.n_i).squaredNorm();
  }
}

SlowModeReport slow_mode_check(const Mode& mode, const JacobianSet& jac,
                               const DevicePark& park, double threshold) {
  Eigen::SelfAdjointEigenSolver<Mat> es(jac.Kii);
  const double radius = park.mp * es.eigenvalues().maxCoeff();
  SlowModeReport rep;
  rep.threshold = threshold;
  rep.ratio = (radius > 0.0) ? std::abs(mode.lambda) / radius
                             : std::numeric_limits<double>::infinity();
  rep.valid = rep.ratio < threshold;
  return rep;
}

std::string modes_csv(const std::vector<Mode>& modes) {
  std::string out = io::csv_row(
      {"mode_id", "re", "im", "freq_hz", "damping_pct", "class", "residual"});
  for (const Mode& m : modes) {
    out += io::csv_row({std::to_string(m.mode_id), io::fmt(m.lambda.real()),
                        io::fmt(m.lambda.imag()), io::fmt(m.freq_hz),
                        io::fmt(100.0 * m.damping), m.klass,
                        io::fmt(std::max(m.residual_right, m.residual_left))});
  }
  return out;
}

}  // namespace gridform
