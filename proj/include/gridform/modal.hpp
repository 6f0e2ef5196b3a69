#pragma once

#include "gridform/statespace.hpp"
#include "gridform/types.hpp"

#include <string>
#include <vector>

// Modal analysis: full spectrum of the state matrix, deterministic mode
// bookkeeping, and high-accuracy eigenvector reconstruction through the
// reduced pencil.
//
// The dense eigensolver gives the spectrum and workable eigenvectors, but on
// realistic data the inverter resolvent is stiff enough that double-precision
// vectors stall near kernel ratios of ~1e-8.  eigvec_from_kernel therefore
// re-derives each eigenpair from the n_g x n_g pencil Lambda(lambda) in 80-bit
// arithmetic, polishing lambda with a Newton step on the smallest singular
// value and lifting the kernel direction back to the full state dimension.

namespace gridform {

struct Mode {
  int mode_id = 0;     // 1-based rank after deterministic ordering
  Cplx lambda;         // representative: Im >= 0 (conjugate stored once)
  double freq_hz = 0.0;    // |Im lambda| / 2 pi
  double damping = 0.0;    // |Re lambda| / |lambda|, as a fraction (I/O uses %)
  CVec u, v;               // unit right / left eigenvectors of A (v^T A = lambda v^T)
  CVec u_star, v_star;     // pencil kernel directions: Lambda u* = 0, Lambda^T v* = 0
  double residual_right = 0.0;  // ||A u - lambda u|| / (||A||_2 ||u||)
  double residual_left = 0.0;   // ||v^T A - lambda v^T|| / (||A||_2 ||v||)
  double sigma_ratio = 0.0;     // smin/smax of Lambda at lambda (0 until kernel pass)
  double vtu_abs = 0.0;         // |v^T u|: conditioning of the eigenvalue
  double p_inv = 0.0;           // energy of u in the inverter-angle block
  double slow_ratio = 0.0;      // |lambda| / spectral radius of the inverter block
  std::string klass;            // "inter-area" | "local" | "real" | "inverter"
};

// Complete spectrum of A with deterministic ordering: conjugate pairs are
// reduced to their Im >= 0 representative, modes sort by (freq_hz, Re lambda),
// and mode_id is the 1-based rank.  Eigenvectors come from the dense solver
// (left vectors are rows of V^-1); residuals are reported against ||A||_2.
// Throws NumericalError if the computed spectrum is not closed under
// conjugation.
std::vector<Mode> eigen_modes(const StateMatrix& sm);

// Assigns a class to every mode.  A mode whose eigenvector carries most of its
// energy in the inverter-angle block is "inverter"; otherwise zero frequency
// is "real", and oscillatory modes are "inter-area" inside [f_lo, f_hi] Hz and
// "local" outside.
void classify_inter_area(std::vector<Mode>& modes, double f_lo = 0.1,
                         double f_hi = 1.0);

struct KernelVectors {
  Cplx lambda;          // polished eigenvalue (80-bit Newton on the pencil)
  CVec u, v;            // unit, phase-fixed full-state eigenvectors
  CVec u_star, v_star;  // unit, phase-fixed pencil kernel directions
  double sigma_ratio = 0.0;         // smin/smax of Lambda at the polished lambda
  double sigma_ratio_second = 0.0;  // second-smallest/smax (simplicity margin)
  double residual_right = 0.0, residual_left = 0.0;
  double vtu_abs = 0.0;
  int newton_iters = 0;
};

// Reconstructs the eigenpair of A at (near) lambda through the reduced pencil:
//   u = [u*, lambda u*, -m_p (lambda I + m_p K_ii)^-1 K_ig u*]
//   v = [(lambda I + M^-1 D) v*, v*, -(lambda I + m_p K_ii)^-1 K_ig M^-1 v*]
// with u* / v* the smallest-singular-value directions of Lambda / Lambda^T.
// Real inputs are polished along the real axis.  Throws ValidationError when
// no polished point reaches sigma_ratio < tol (lambda is not on the spectrum)
// and NumericalError when a second singular value also collapses ("repeated
// mode").
KernelVectors eigvec_from_kernel(const JacobianSet& jac, const DevicePark& park,
                                 Cplx lambda, double tol = 1e-8);

// Replaces each mode's eigenvalue, vectors, and residuals with the polished
// kernel reconstruction.  Classes and ordering are untouched.
void refine_modes(std::vector<Mode>& modes, const JacobianSet& jac,
                  const DevicePark& park, double tol = 1e-8);

struct SlowModeReport {
  double ratio = 0.0;  // |lambda| / (m_p * lambda_max(K_ii))
  bool valid = false;  // ratio below the threshold
  double threshold = 0.1;
};

// Separation between a swing mode and the inverter relaxation cluster; the
// asymptotic expansions downstream are trustworthy for valid (slow) modes.
SlowModeReport slow_mode_check(const Mode& mode, const JacobianSet& jac,
                               const DevicePark& park, double threshold = 0.1);

// CSV table: mode_id, re, im, freq_hz, damping_pct, class, residual.
std::string modes_csv(const std::vector<Mode>& modes);

}  // namespace gridform
