#pragma once

#include "gridform/modal.hpp"
#include "gridform/statespace.hpp"
#include "gridform/types.hpp"

#include <functional>
#include <vector>

// Droop sensitivity of eigenvalues and the large-droop asymptotics.
//
// Differentiating the reduced pencil at a simple eigenvalue gives
//
//   dlambda/dm_p = lambda (v*^T M^-1 R u*) / (v*^T M^-1 (m_p R + Q) u*),
//
// with R = K_gi (lambda I + m_p K_ii)^-2 K_ig and Q = 2 lambda M + D.  The
// same derivative is also available as the full-state Rayleigh quotient
// v^T (dA/dm_p) u / (v^T u); both are computed and must agree, which catches
// sign and lifting mistakes in either path.
//
// For large m_p the resolvent expands in 1/m_p; the second-order approximants
//
//   R     ~ (m_p U1 + 2 conj(lambda) U2) / m_p^3
//   Theta ~ (m_p Theta1 + Theta2) / m_p^3
//
// are reproduced here exactly as stated by the source model, including the
// conjugate in the R term.  Their remainders then carry a term proportional
// to |Re lambda| / m_p^3, so the advertised ~m_p^-4 decay is observed for
// lightly damped (near-imaginary) modes; the asymptotic_check harness exposes
// the fitted exponent so this regime is measurable rather than assumed.

namespace gridform {

struct AsymptoticSet {
  Mat U1, U2;          // K_gi K_ii^-2 K_ig and K_gi K_ii^-3 K_ig (real sym PD)
  CMat Q;              // 2 lambda M + D (diagonal)
  CMat Theta1, Theta2; // numerator matrices of the Theta expansion
  CMat R;              // K_gi (lambda I + m_p K_ii)^-2 K_ig
  CMat Theta;          // lambda R (m_p conj(R) + conj(Q))
  Cplx lambda;
  double mp = 0.0;
};

// Builds every matrix of the asymptotic family at (lambda, m_p).  m_p is
// explicit (not taken from the park) so expansion sweeps can move it freely.
AsymptoticSet asymptotic_matrices(const JacobianSet& jac, const DevicePark& park,
                                  Cplx lambda, double mp);

struct DroopSensitivity {
  Cplx analytic;  // pencil quotient
  Cplx raw;       // v^T (dA/dm_p) u / (v^T u)
  double cond = 0.0;  // |v^T u| with unit u, v
};

// Analytic droop sensitivity at a simple mode.  The mode must carry kernel
// vectors (refine_modes / eigvec_from_kernel); if absent they are computed
// here.  Throws NumericalError on a near-defective mode (|v^T u| < 1e-8), a
// collapsing quotient denominator (< 1e-12), or when the two forms disagree
// beyond 1e-8 relative.
DroopSensitivity dlambda_dmp_analytic(const JacobianSet& jac, const DevicePark& park,
                                      const Mode& mode);

struct FdSensitivity {
  Cplx value;      // Richardson-extrapolated central difference
  double step = 0.0;     // base step h
  int richardson_order = 4;
};

// Finite-difference oracle: central differences of the tracked eigenvalue of
// builder(m_p) at mp0, refined once by Richardson ((4 D(h/2) - D(h)) / 3).
// Tracking picks the eigenvector of maximal overlap with mode.u and requires
// overlap >= 0.9 ("mode-tracking ambiguity" otherwise).  h <= 0 selects the
// default 1e-4 * max(mp0, 1e-6).
FdSensitivity dlambda_dmp_fd(const std::function<StateMatrix(double)>& builder,
                             double mp0, const Mode& mode, double h = 0.0);

struct AsymptoticCheckRow {
  double mp = 0.0;
  double e_R = 0.0;      // || R - (m_p U1 + 2 conj(lambda) U2)/m_p^3 ||_2
  double e_Theta = 0.0;  // || Theta - (m_p Theta1 + Theta2)/m_p^3 ||_2
};

struct AsymptoticCheck {
  std::vector<AsymptoticCheckRow> rows;
  double exponent_R = 0.0;      // fitted decay exponents of e(m_p) ~ m_p^-x
  double exponent_Theta = 0.0;  // (NaN when the residuals vanish identically)
};

// Evaluates the expansion residuals over a droop grid and fits their decay
// exponents by least squares in log-log coordinates.
AsymptoticCheck asymptotic_check(const JacobianSet& jac, const DevicePark& park,
                                 Cplx lambda, const std::vector<double>& mp_values);

struct SensitivityReport {
  int mode_id = 0;
  DroopSensitivity sens;
  FdSensitivity fd;
  double rel_err = 0.0;  // |analytic - fd| / max(|analytic|, |fd|)
  double e_R = 0.0, e_Theta = 0.0;  // expansion residuals at the operating droop
  CVec w_star;  // M^-1 conj(v*): the weighting the quotient actually applies
  CMat U_star;  // u* u*^H: rank-one mode projector (provenance for reports)
};

// Full per-mode report: analytic + FD cross-check + expansion residuals.
SensitivityReport sensitivity_report(const JacobianSet& jac, const DevicePark& park,
                                     const Mode& mode, double fd_step = 0.0);

// CSV table: mode_id, dre_dmp, dim_dmp, fd_re, fd_im, rel_err, cond.
std::string sensitivity_csv(const std::vector<SensitivityReport>& reports);

}  // namespace gridform
