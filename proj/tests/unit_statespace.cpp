#include "test_support.hpp"

#include "gridform/netmodel.hpp"
#include "gridform/statespace.hpp"

#include <doctest.h>

#include <cmath>

using namespace gridform;

namespace {

struct ToyModel {
  JacobianSet jac;
  DevicePark park;
};

ToyModel toy() {
  NetworkCase cse = load_case_file(ts::toy_path());
  return {build_jacobians(kron_reduce(cse)), build_park(cse)};
}

}  // namespace

TEST_CASE("state matrix follows the block template") {
  ToyModel tm = toy();
  StateMatrix sm = assemble_state_matrix(tm.jac, tm.park);
  const int ng = 2, ni = 3;
  REQUIRE(sm.A.rows() == 2 * ng + ni);
  CHECK(sm.mp == tm.park.mp);

  const Mat Minv = tm.park.M.cwiseInverse().asDiagonal();
  CHECK((sm.A.block(0, 0, ng, ng)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sm.A.block(0, ng, ng, ng) - Mat::Identity(ng, ng)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((sm.A.block(0, 2 * ng, ng, ni)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sm.A.block(ng, 0, ng, ng) + Minv * tm.jac.Kgg).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((sm.A.block(ng, ng, ng, ng) +
         Mat((tm.park.D.array() / tm.park.M.array()).matrix().asDiagonal()))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  CHECK((sm.A.block(ng, 2 * ng, ng, ni) + Minv * tm.jac.Kgi).cwiseAbs().maxCoeff() <
        1e-14);
  CHECK((sm.A.block(2 * ng, 0, ni, ng) + tm.park.mp * tm.jac.Kig).cwiseAbs().maxCoeff() <
        1e-14);
  CHECK((sm.A.block(2 * ng, ng, ni, ng)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sm.A.block(2 * ng, 2 * ng, ni, ni) + tm.park.mp * tm.jac.Kii)
            .cwiseAbs()
            .maxCoeff() < 1e-14);

  CHECK(sm.state_labels ==
        std::vector<std::string>{"delta_g1", "delta_g2", "omega_g1", "omega_g2",
                                 "delta_i1", "delta_i2", "delta_i3"});
}

TEST_CASE("state matrix is reproducible and fingerprinted") {
  ToyModel tm = toy();
  StateMatrix a = assemble_state_matrix(tm.jac, tm.park);
  StateMatrix b = assemble_state_matrix(tm.jac, tm.park);
  CHECK(a.jacobian_hash == b.jacobian_hash);
  CHECK(a.park_hash == b.park_hash);
  CHECK((a.A - b.A).cwiseAbs().maxCoeff() == 0.0);

  JacobianSet other = tm.jac;
  other.Kgg(0, 0) += 1e-9;
  CHECK(assemble_state_matrix(other, tm.park).jacobian_hash != a.jacobian_hash);
}

TEST_CASE("the GFM block is exactly linear in the effective droop") {
  ToyModel tm = toy();
  DevicePark half = tm.park;
  half.mp = 0.5 * tm.park.mp;  // power-of-two rescale: bitwise comparable
  StateMatrix full = assemble_state_matrix(tm.jac, tm.park);
  StateMatrix hl = assemble_state_matrix(tm.jac, half);
  const int ng = 2, ni = 3;
  CHECK((full.A.bottomRows(ni) - 2.0 * hl.A.bottomRows(ni)).cwiseAbs().maxCoeff() ==
        0.0);
  // The swing rows do not depend on the droop at all.
  CHECK((full.A.topRows(2 * ng) - hl.A.topRows(2 * ng)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one-machine canonical model") {
  // K_gg = K_ii = 1, K_gi = -0.5, M = 1, D = 0.1, m_p = 1: the reduced dynamics
  // have characteristic polynomial s^3 + 1.1 s^2 + 1.1 s + 0.75.
  ReducedNetwork red;
  red.B_red.resize(2, 2);
  red.B_red << 1.0, -0.5, -0.5, 1.0;
  red.E = Vec::Ones(2);
  red.delta0 = Vec::Zero(2);
  red.node_ids = {"g1", "i1"};
  red.n_g = 1;
  red.n_i = 1;
  JacobianSet jac = build_jacobians(red);
  CHECK(jac.Kgg(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(jac.Kii(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(jac.Kgi(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));

  DevicePark park = ts::make_park(Vec::Ones(1), Vec::Constant(1, 0.1), 1, 1.0);
  StateMatrix sm = assemble_state_matrix(jac, park);
  Mat want(3, 3);
  want << 0, 1, 0, -1, -0.1, 0.5, 0.5, 0, -1;
  CHECK((sm.A - want).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::EigenSolver<Mat> es(sm.A);
  for (int i = 0; i < 3; ++i) {
    const Cplx l = es.eigenvalues()(i);
    CHECK(std::abs(l * l * l + 1.1 * l * l + 1.1 * l + 0.75) < 1e-9);
    // Each state-matrix eigenvalue is a root of the reduced pencil.
    LambdaEval ev = lambda_matrix(jac, park, l);
    CHECK(std::abs(ev.Lambda(0, 0)) < 1e-9);
  }
}

TEST_CASE("the pencil at zero frequency is droop-independent") {
  ToyModel tm = toy();
  DevicePark half = tm.park;
  half.mp = 2.5;
  LambdaEval a = lambda_matrix(tm.jac, tm.park, Cplx(0.0, 0.0));
  LambdaEval b = lambda_matrix(tm.jac, half, Cplx(0.0, 0.0));
  CHECK((a.Lambda - b.Lambda).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the pencil rejects evaluation on the relaxation spectrum") {
  ToyModel tm = toy();
  Eigen::SelfAdjointEigenSolver<Mat> es(tm.jac.Kii);
  const Cplx pole(-tm.park.mp * es.eigenvalues()(0), 0.0);
  CHECK_THROWS_AS(lambda_matrix(tm.jac, tm.park, pole), NumericalError);
  // Slightly off the pole it is fine again.
  CHECK_NOTHROW(lambda_matrix(tm.jac, tm.park, pole + Cplx(0.5, 0.0)));
}

TEST_CASE("extended-precision pencil agrees with the double evaluation") {
  ToyModel tm = toy();
  const Cplx l(-0.01, 3.5);
  LambdaEval d = lambda_matrix(tm.jac, tm.park, l);
  LambdaEvalL x = lambda_matrix_ld(tm.jac, tm.park, LCplx(l.real(), l.imag()));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const Cplx xe(static_cast<double>(x.Lambda(r, c).real()),
                    static_cast<double>(x.Lambda(r, c).imag()));
      CHECK(std::abs(xe - d.Lambda(r, c)) < 1e-12);
    }

  // Lambda' matches a central difference of Lambda.
  const double h = 1e-6;
  LambdaEval p = lambda_matrix(tm.jac, tm.park, l + Cplx(h, 0.0));
  LambdaEval m = lambda_matrix(tm.jac, tm.park, l - Cplx(h, 0.0));
  CMat fd = (p.Lambda - m.Lambda) / (2.0 * h);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const Cplx xp(static_cast<double>(x.Lambda_prime(r, c).real()),
                    static_cast<double>(x.Lambda_prime(r, c).imag()));
      CHECK(std::abs(xp - fd(r, c)) < 1e-5 * std::max(1.0, std::abs(xp)));
    }
}
