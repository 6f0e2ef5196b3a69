#pragma once

#include "gridform/devices.hpp"
#include "gridform/modal.hpp"
#include "gridform/sensitivity.hpp"
#include "gridform/types.hpp"

#include <string>
#include <vector>

// Damping-design screens for inter-area modes.
//
// The sign of d|Re lambda|/dm_p is controlled, to leading order in 1/m_p, by
// the Hermitian part of Theta ~ (m_p Theta1 + Theta2)/m_p^3: a positive
// largest eigenvalue of (m_p Theta1 + Theta2)_h is necessary for droop motion
// to be able to improve the mode's damping ratio ("damping-enhancement
// possible"); a non-positive one excludes it.  Inverting that screen under
// uniform-fleet bounds gives a droop floor m* below which enhancement is
// excluded whenever the fleet satisfies the preconditions
//
//   D_u D_l < D*(lambda)   and   zeta_l < zeta < zeta_u,
//
// with D*, zeta_l, zeta_u closed-form in (|lambda|, M_u, M_l, D_u, D_l,
// gamma_l, gamma_u).  All damping ratios are fractions here; percent belongs
// to the I/O layer.

namespace gridform {

struct HermitianSplit {
  CMat herm;  // (C + C^H) / 2
  CMat skew;  // (C - C^H) / 2;  C = herm + skew exactly
};

HermitianSplit hermitian_part(const CMat& C);

struct Theorem1Result {
  double lmax_theta1h = 0.0;  // lambda_max of the Hermitian part of Theta1
  double lmax_theta2h = 0.0;  // same for Theta2
  double lhs = 0.0;           // m_p * lmax_theta1h + lmax_theta2h
  bool holds = false;         // lhs > 0: damping enhancement possible
};

// Evaluates the necessary condition at the given droop.
Theorem1Result theorem1_condition(const AsymptoticSet& aset, double mp);

struct DesignVariables {
  double Dstar = 0.0;
  double zeta_l = 0.0;
  double zeta_u = 0.0;        // +inf when D_l = 0
  bool zeta_u_finite = true;
};

// Closed-form design variables at a mode:
//   D*     = M_u (1/gamma_u + 4|lambda|^2 M_l) / (gamma_u/gamma_l)
//   zeta_l = 2|lambda| D_u (gamma_u/gamma_l)^3 / (1/gamma_u + 4|lambda|^2 M_l)
//   zeta_u = 2|lambda| M_u (gamma_u/gamma_l)^2 / D_l
DesignVariables design_variables(Cplx lambda, const ParkExtremes& ex,
                                 double gamma_l, double gamma_u);

struct MstarResult {
  double mstar = 0.0;               // droop floor; meaningful when applicable
  bool preconditions_hold = false;  // D_u D_l < D* and zeta_l < zeta < zeta_u
  bool applicable = false;          // preconditions hold and mstar > 0
  DesignVariables vars;
};

// Droop lower bound
//   m* = (1 + 4|lambda|^2 M_l gamma_u)(zeta - zeta_l)
//        / (gamma_u^2 D_l (zeta_u - zeta))
// evaluated together with its preconditions.  zeta is a fraction.
MstarResult mstar(Cplx lambda, double zeta, const ParkExtremes& ex, double gamma_u,
                  double gamma_l);

// Vanishing-damping limit of m*:
//   m*_lim = (1 + 4|lambda|^2 M_l gamma_u) zeta / (2|lambda| M_u gamma_u^2)
double mstar_limit(Cplx lambda, double zeta, double M_l, double M_u, double gamma_u);

struct ModeDesign {
  int mode_id = 0;
  Cplx lambda;
  double zeta = 0.0;  // fraction
  Theorem1Result theorem1;
  DesignVariables vars;
  bool preconditions_hold = false;
  double mstar = 0.0;
  bool mstar_applicable = false;
  double margin = 0.0;  // m_p - m*
  double mstar_lim = 0.0;
  std::string verdict;  // "damping-enhancement possible" | "damping-enhancement excluded"
};

// Runs the full screen on every inter-area mode (classified beforehand).
std::vector<ModeDesign> evaluate_design(const JacobianSet& jac, const DevicePark& park,
                                        const std::vector<Mode>& modes);

// JSON body for the check-design artifact: per-mode records keyed by mode_id
// plus the maxima of the listed bounds (no claim about which one governs).
std::string design_json(const std::vector<ModeDesign>& designs, double mp);

}  // namespace gridform
