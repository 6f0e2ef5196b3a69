#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace gridform {

// Dense linear-algebra aliases. Everything in this codebase is small and dense
// (tens of states), so no sparse machinery is used anywhere.
using Vec  = Eigen::VectorXd;
using Mat  = Eigen::MatrixXd;
using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Extended-precision twins used by the eigenvalue polish path.  The resolvent
// (lambda*I + m_p*K_ii) can reach condition numbers ~1e8 on realistic data, at
// which point double-precision kernel extraction bottoms out around 5e-9; the
// 80-bit path keeps the achievable singularity ratio near 1e-11.
using LReal = long double;
using LCplx = std::complex<long double>;
using LCMat = Eigen::Matrix<LCplx, Eigen::Dynamic, Eigen::Dynamic>;
using LCVec = Eigen::Matrix<LCplx, Eigen::Dynamic, 1>;

// Error taxonomy, mirrored by CLI exit codes:
//   ValidationError -> exit 1: malformed input, violated model preconditions.
//   NumericalError  -> exit 2: algorithmic breakdown on structurally valid input
//                              (non-convergence, ill-conditioned quotients, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gridform
