#include "gridform/sensitivity.hpp"

#include "gridform/io.hpp"

#include <cmath>
#include <limits>

namespace gridform {

namespace {

// Spectral norm of a complex matrix (small and dense everywhere here).
double norm2(const CMat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(A);
  return svd.singularValues()(0);
}

CMat resolvent_sq(const JacobianSet& jac, Cplx lambda, double mp) {
  const int ni = jac.n_i;
  CMat res = lambda * CMat::Identity(ni, ni) + Cplx(mp) * jac.Kii.cast<Cplx>();
  Eigen::FullPivLU<CMat> lu(res);
  if (!lu.isInvertible())
    throw NumericalError("inverter resolvent singular at lambda = " +
                         io::fmt_complex(lambda.real(), lambda.imag()) +
                         " in sensitivity evaluation");
  CMat RKig = lu.solve(jac.Kig.cast<Cplx>());
  return jac.Kgi.cast<Cplx>() * lu.solve(RKig);
}

}  // namespace

AsymptoticSet asymptotic_matrices(const JacobianSet& jac, const DevicePark& park,
                                  Cplx lambda, double mp) {
  const int ng = jac.n_g;

  Eigen::LLT<Mat> llt(jac.Kii);
  if (llt.info() != Eigen::Success)
    throw ValidationError("K_ii is not positive definite; the droop expansion "
                          "is undefined on this network");
  Mat KiiInvKig = llt.solve(jac.Kig);            // K_ii^-1 K_ig
  Mat Kii2InvKig = llt.solve(KiiInvKig);         // K_ii^-2 K_ig
  Mat Kii3InvKig = llt.solve(Kii2InvKig);        // K_ii^-3 K_ig

  AsymptoticSet as;
  as.lambda = lambda;
  as.mp = mp;
  as.U1 = jac.Kgi * Kii2InvKig;
  as.U2 = jac.Kgi * Kii3InvKig;
  as.U1 = 0.5 * (as.U1 + as.U1.transpose().eval());
  as.U2 = 0.5 * (as.U2 + as.U2.transpose().eval());

  const double a2 = std::norm(lambda);  // |lambda|^2
  CVec Qd(ng);
  for (int k = 0; k < ng; ++k)
    Qd(k) = 2.0 * lambda * park.M(k) + park.D(k);
  as.Q = Qd.asDiagonal();

  // Theta1 = U1 (2|lambda|^2 M + lambda D)
  CVec t1(ng);
  for (int k = 0; k < ng; ++k)
    t1(k) = 2.0 * a2 * park.M(k) + lambda * park.D(k);
  as.Theta1 = as.U1.cast<Cplx>() * t1.asDiagonal();

  // Theta2 = lambda U1^2 + 2|lambda|^2 U2 (2 conj(lambda) M + D)
  CVec t2(ng);
  for (int k = 0; k < ng; ++k)
    t2(k) = 2.0 * std::conj(lambda) * park.M(k) + park.D(k);
  as.Theta2 = lambda * (as.U1 * as.U1).cast<Cplx>() +
              2.0 * a2 * (as.U2.cast<Cplx>() * t2.asDiagonal());

  as.R = resolvent_sq(jac, lambda, mp);
  as.Theta = lambda * as.R * (Cplx(mp) * as.R.conjugate() + as.Q.conjugate());
  return as;
}

DroopSensitivity dlambda_dmp_analytic(const JacobianSet& jac, const DevicePark& park,
                                      const Mode& mode) {
  Mode m = mode;
  if (m.u_star.size() == 0 || m.v_star.size() == 0 || m.u.size() == 0 ||
      m.v.size() == 0) {
    KernelVectors kv = eigvec_from_kernel(jac, park, m.lambda);
    m.lambda = kv.lambda;
    m.u = kv.u;
    m.v = kv.v;
    m.u_star = kv.u_star;
    m.v_star = kv.v_star;
    m.vtu_abs = kv.vtu_abs;
  }
  const Cplx lambda = m.lambda;
  const double mp = park.mp;

  const double cond = std::abs((m.v.transpose() * m.u)(0, 0)) /
                      (m.u.norm() * m.v.norm());
  if (cond < 1e-8)
    throw NumericalError("mode at lambda = " +
                         io::fmt_complex(lambda.real(), lambda.imag()) +
                         " is near-defective (|v^T u| = " + io::fmt(cond) +
                         "); droop sensitivity is not defined");

  // Pencil quotient: lambda (v*^T M^-1 R u*) / (v*^T M^-1 (m_p R + Q) u*).
  const CMat R = resolvent_sq(jac, lambda, mp);
  CVec w(jac.n_g);  // M^-1 v* (M diagonal)
  for (int k = 0; k < jac.n_g; ++k) w(k) = m.v_star(k) / park.M(k);
  const CVec Ru = R * m.u_star;
  CVec Qu(jac.n_g);
  for (int k = 0; k < jac.n_g; ++k)
    Qu(k) = (2.0 * lambda * park.M(k) + park.D(k)) * m.u_star(k);
  const Cplx num = lambda * (w.transpose() * Ru)(0, 0);
  const Cplx den = (w.transpose() * (Cplx(mp) * Ru + Qu))(0, 0);
  if (std::abs(den) < 1e-12)
    throw NumericalError("droop-sensitivity denominator collapsed (|den| = " +
                         io::fmt(std::abs(den)) + ") at lambda = " +
                         io::fmt_complex(lambda.real(), lambda.imag()));

  DroopSensitivity ds;
  ds.analytic = num / den;
  ds.cond = cond;

  // Full-state Rayleigh quotient against dA/dm_p.
  const CMat dA = state_matrix_dmp(jac).cast<Cplx>();
  const Cplx vtu = (m.v.transpose() * m.u)(0, 0);
  ds.raw = (m.v.transpose() * (dA * m.u))(0, 0) / vtu;

  const double rel = std::abs(ds.analytic - ds.raw) /
                     std::max({std::abs(ds.analytic), std::abs(ds.raw), 1e-300});
  if (rel > 1e-8)
    throw NumericalError("droop-sensitivity cross-check failed: pencil " +
                         io::fmt_complex(ds.analytic.real(), ds.analytic.imag()) +
                         " vs state-space " +
                         io::fmt_complex(ds.raw.real(), ds.raw.imag()) +
                         " (rel " + io::fmt(rel) + ")");
  return ds;
}

namespace {

// Eigenvalue of builder(mp) continued from `mode` by eigenvector overlap.
Cplx tracked_eigenvalue(const std::function<StateMatrix(double)>& builder, double mp,
                        const Mode& mode) {
  StateMatrix sm = builder(mp);
  std::vector<Mode> modes = eigen_modes(sm);
  double best_overlap = -1.0;
  double best_dist = std::numeric_limits<double>::infinity();
  Cplx best = 0.0;
  for (const Mode& c : modes) {
    const double overlap = std::abs((c.u.adjoint() * mode.u)(0, 0));
    const double dist = std::abs(c.lambda - mode.lambda);
    if (overlap > best_overlap + 1e-12 ||
        (std::abs(overlap - best_overlap) <= 1e-12 && dist < best_dist)) {
      best_overlap = overlap;
      best_dist = dist;
      best = c.lambda;
    }
  }
  if (best_overlap < 0.9)
    throw NumericalError("mode-tracking ambiguity at m_p = " + io::fmt(mp) +
                         ": best eigenvector overlap " + io::fmt(best_overlap) +
                         " < 0.9");
  return best;
}

}  // namespace

FdSensitivity dlambda_dmp_fd(const std::function<StateMatrix(double)>& builder,
                             double mp0, const Mode& mode, double h) {
  if (mode.u.size() == 0)
    throw ValidationError("finite-difference sensitivity needs a mode with an "
                          "eigenvector for tracking");
  if (h <= 0.0) h = 1e-4 * std::max(mp0, 1e-6);

  auto central = [&](double step) {
    const Cplx lp = tracked_eigenvalue(builder, mp0 + step, mode);
    const Cplx lm = tracked_eigenvalue(builder, mp0 - step, mode);
    return (lp - lm) / (2.0 * step);
  };
  const Cplx d_h = central(h);
  const Cplx d_h2 = central(0.5 * h);

  FdSensitivity fd;
  fd.value = (4.0 * d_h2 - d_h) / 3.0;  // cancels the O(h^2) term
  fd.step = h;
  fd.richardson_order = 4;
  return fd;
}

AsymptoticCheck asymptotic_check(const JacobianSet& jac, const DevicePark& park,
                                 Cplx lambda, const std::vector<double>& mp_values) {
  if (mp_values.size() < 2)
    throw ValidationError("asymptotic check needs at least two droop values");

  AsymptoticCheck chk;
  bool all_zero_R = true, all_zero_T = true;
  for (double mp : mp_values) {
    AsymptoticSet as = asymptotic_matrices(jac, park, lambda, mp);
    const double mp3 = mp * mp * mp;
    CMat approx_R =
        (mp * as.U1.cast<Cplx>() + 2.0 * std::conj(lambda) * as.U2.cast<Cplx>()) / mp3;
    CMat approx_T = (mp * as.Theta1 + as.Theta2) / mp3;
    AsymptoticCheckRow row;
    row.mp = mp;
    row.e_R = norm2(as.R - approx_R);
    row.e_Theta = norm2(as.Theta - approx_T);
    all_zero_R = all_zero_R && row.e_R == 0.0;
    all_zero_T = all_zero_T && row.e_Theta == 0.0;
    chk.rows.push_back(row);
  }

  // Least-squares slope of ln e against ln m_p; the decay exponent is -slope.
  auto fit = [&chk](auto pick, bool degenerate) {
    if (degenerate) return std::numeric_limits<double>::quiet_NaN();
    const size_t n = chk.rows.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : chk.rows) {
      const double x = std::log(r.mp);
      const double y = std::log(std::max(pick(r), 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return -slope;
  };
  chk.exponent_R = fit([](const AsymptoticCheckRow& r) { return r.e_R; }, all_zero_R);
  chk.exponent_Theta =
      fit([](const AsymptoticCheckRow& r) { return r.e_Theta; }, all_zero_T);
  return chk;
}

SensitivityReport sensitivity_report(const JacobianSet& jac, const DevicePark& park,
                                     const Mode& mode, double fd_step) {
  SensitivityReport rep;
  rep.mode_id = mode.mode_id;

  Mode m = mode;
  if (m.u_star.size() == 0) {
    KernelVectors kv = eigvec_from_kernel(jac, park, m.lambda);
    m.lambda = kv.lambda;
    m.u = kv.u;
    m.v = kv.v;
    m.u_star = kv.u_star;
    m.v_star = kv.v_star;
  }

  rep.sens = dlambda_dmp_analytic(jac, park, m);

  auto builder = [&jac, park](double mp) {
    DevicePark p = park;
    p.mp = mp;
    return assemble_state_matrix(jac, p);
  };
  rep.fd = dlambda_dmp_fd(builder, park.mp, m, fd_step);
  rep.rel_err = std::abs(rep.sens.analytic - rep.fd.value) /
                std::max({std::abs(rep.sens.analytic), std::abs(rep.fd.value), 1e-300});

  AsymptoticSet as = asymptotic_matrices(jac, park, m.lambda, park.mp);
  const double mp3 = park.mp * park.mp * park.mp;
  rep.e_R = norm2(as.R - (park.mp * as.U1.cast<Cplx>() +
                          2.0 * std::conj(m.lambda) * as.U2.cast<Cplx>()) /
                             mp3);
  rep.e_Theta = norm2(as.Theta - (park.mp * as.Theta1 + as.Theta2) / mp3);

  rep.w_star.resize(jac.n_g);
  for (int k = 0; k < jac.n_g; ++k)
    rep.w_star(k) = std::conj(m.v_star(k)) / park.M(k);
  rep.U_star = m.u_star * m.u_star.adjoint();
  return rep;
}

std::string sensitivity_csv(const std::vector<SensitivityReport>& reports) {
  std::string out = io::csv_row(
      {"mode_id", "dre_dmp", "dim_dmp", "fd_re", "fd_im", "rel_err", "cond"});
  for (const auto& r : reports) {
    out += io::csv_row({std::to_string(r.mode_id), io::fmt(r.sens.analytic.real()),
                        io::fmt(r.sens.analytic.imag()), io::fmt(r.fd.value.real()),
                        io::fmt(r.fd.value.imag()), io::fmt(r.rel_err),
                        io::fmt(r.sens.cond)});
  }
  return out;
}

}  // namespace gridform
