#pragma once

#include "gridform/devices.hpp"
#include "gridform/netmodel.hpp"
#include "gridform/types.hpp"

#include <string>
#include <vector>

// Small-signal state matrix of the SG + droop-GFM system and the reduced
// quadratic pencil used by the kernel-extraction and polish machinery.
//
// States are ordered [delta_g, omega_g, delta_i].  With the GFM filters in
// their quasi-steady limit, the swing + droop equations linearize to
//
//       A = [      0           I        0     ]
//           [ -M^-1 K_gg   -M^-1 D  -M^-1 K_gi]
//           [ -m_p K_ig        0    -m_p K_ii ]
//
// Eliminating the inverter block at a complex frequency lambda leaves the
// n_g x n_g pencil
//
//   Lambda(lambda) = lambda^2 I + lambda M^-1 D
//                  + M^-1 (K_gg - m_p K_gi (lambda I + m_p K_ii)^-1 K_ig),
//
// whose kernel directions lift to eigenvectors of A.

namespace gridform {

struct StateMatrix {
  Mat A;
  int n_g = 0, n_i = 0;
  double mp = 0.0;
  std::vector<std::string> state_labels;  // delta_<sg>..., omega_<sg>..., delta_<gfm>...
  std::string jacobian_hash;              // fingerprints of the inputs this A was
  std::string park_hash;                  // assembled from (provenance trail)
};

// Assembles A from the network Jacobians and the device park.
StateMatrix assemble_state_matrix(const JacobianSet& jac, const DevicePark& park);

// Derivative of A with respect to the common droop m_p (constant in m_p):
// only the third block row moves, d A / d m_p = [[0,0,0],[0,0,0],[-K_ig,0,-K_ii]].
Mat state_matrix_dmp(const JacobianSet& jac);

// CSV dump of A with state labels on both axes.
std::string state_matrix_csv(const StateMatrix& sm);

// ---- reduced pencil -------------------------------------------------------------

struct LambdaEval {
  CMat Lambda;                  // the n_g x n_g pencil at lambda
  double resolvent_smin = 0.0;  // smallest singular value of (lambda I + m_p K_ii)
};

// Evaluates Lambda(lambda).  Throws NumericalError carrying lambda when the
// inner resolvent (lambda I + m_p K_ii) is singular within 1e-12.
LambdaEval lambda_matrix(const JacobianSet& jac, const DevicePark& park, Cplx lambda);

struct LambdaEvalL {
  LCMat Lambda;        // pencil at lambda, 80-bit precision
  LCMat Lambda_prime;  // d Lambda / d lambda at the same point
  LReal resolvent_smin = 0.0L;
};

// Extended-precision twin including the lambda-derivative
//   Lambda'(lambda) = 2 lambda I + M^-1 D
//                   + m_p M^-1 K_gi (lambda I + m_p K_ii)^-2 K_ig.
// Feeds the Newton polish that pushes kernel residuals below double's floor.
LambdaEvalL lambda_matrix_ld(const JacobianSet& jac, const DevicePark& park,
                             LCplx lambda);

}  // namespace gridform
