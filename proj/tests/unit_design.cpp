#include "test_support.hpp"

#include "gridform/design.hpp"
#include "gridform/modal.hpp"
#include "gridform/netmodel.hpp"
#include "gridform/statespace.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <limits>

using namespace gridform;

namespace {

struct ToyDesign {
  DevicePark park;
  std::vector<ModeDesign> designs;
};

ToyDesign toy_designs() {
  NetworkCase cse = load_case_file(ts::toy_path());
  JacobianSet jac = build_jacobians(kron_reduce(cse));
  DevicePark park = build_park(cse);
  StateMatrix sm = assemble_state_matrix(jac, park);
  std::vector<Mode> modes = eigen_modes(sm);
  refine_modes(modes, jac, park);
  classify_inter_area(modes);
  return {park, evaluate_design(jac, park, modes)};
}

}  // namespace

TEST_CASE("design variables reduce to round numbers on the unit example") {
  const Cplx l(0.0, 1.0);
  const ParkExtremes ex{1.0, 1.0, 0.1, 0.1};
  DesignVariables dv = design_variables(l, ex, 1.0, 1.0);
  CHECK(dv.Dstar == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(dv.zeta_l == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(dv.zeta_u == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(dv.zeta_u_finite);
}

TEST_CASE("droop floor hits its boundary values exactly") {
  const Cplx l(0.0, 1.0);
  const ParkExtremes ex{1.0, 1.0, 0.1, 0.1};
  DesignVariables dv = design_variables(l, ex, 1.0, 1.0);

  // zeta at the lower edge: numerator cancels bitwise, floor is exactly zero.
  MstarResult at_lo = mstar(l, dv.zeta_l, ex, 1.0, 1.0);
  CHECK(at_lo.mstar == 0.0);
  CHECK_FALSE(at_lo.preconditions_hold);  // strict inequality required

  // interior point: m* = 5 * 0.01 / (0.1 * 19.95)
  MstarResult mid = mstar(l, 0.05, ex, 1.0, 1.0);
  CHECK(mid.preconditions_hold);
  CHECK(mid.applicable);
  CHECK(mid.mstar == doctest::Approx(0.0250626566416).epsilon(1e-9));

  // zeta at the upper edge: denominator cancels, floor diverges to +inf.
  MstarResult at_hi = mstar(l, dv.zeta_u, ex, 1.0, 1.0);
  CHECK(std::isinf(at_hi.mstar));
  CHECK(at_hi.mstar > 0.0);
  CHECK_FALSE(at_hi.preconditions_hold);
}

TEST_CASE("vanishing-damping limit agrees with the full floor") {
  const Cplx l(0.0, 1.0);
  CHECK(mstar_limit(l, 0.1, 1.0, 1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-12));

  const ParkExtremes tiny{1.0, 1.0, 1e-9, 1e-9};
  MstarResult full = mstar(l, 0.1, tiny, 1.0, 1.0);
  REQUIRE(full.preconditions_hold);
  CHECK(full.mstar == doctest::Approx(mstar_limit(l, 0.1, 1.0, 1.0, 1.0)).epsilon(1e-6));
}

TEST_CASE("frozen case reproduces the design screen verbatim") {
  ToyDesign td = toy_designs();
  REQUIRE(td.designs.size() == 2);

  struct Want {
    int id;
    double Dstar, zeta_l, zeta_u, mstar, mstar_lim;
    double lmax1, lmax2, lhs;
  };
  const Want wants[] = {
      {4, 0.03267464922, 0.1344684177, 32545.988, -0.001883683832, 0.0008549418361,
       0.007027614459, 0.0002320916392, 0.03537016393},
      {5, 0.05369726301, 0.1054074167, 41926.59095, -0.001872759985, 0.001094114689,
       0.0116625186, 0.0004928306664, 0.05880542365},
  };
  for (size_t i = 0; i < 2; ++i) {
    const ModeDesign& d = td.designs[i];
    const Want& w = wants[i];
    CAPTURE(w.id);
    CHECK(d.mode_id == w.id);
    CHECK(d.vars.Dstar == doctest::Approx(w.Dstar).epsilon(1e-6));
    CHECK(d.vars.zeta_l == doctest::Approx(w.zeta_l).epsilon(1e-6));
    CHECK(d.vars.zeta_u == doctest::Approx(w.zeta_u).epsilon(1e-6));
    CHECK(d.vars.zeta_u_finite);
    CHECK(d.mstar == doctest::Approx(w.mstar).epsilon(1e-6));
    CHECK(d.mstar_lim == doctest::Approx(w.mstar_lim).epsilon(1e-6));
    CHECK(d.theorem1.lmax_theta1h == doctest::Approx(w.lmax1).epsilon(1e-6));
    CHECK(d.theorem1.lmax_theta2h == doctest::Approx(w.lmax2).epsilon(1e-6));
    CHECK(d.theorem1.lhs == doctest::Approx(w.lhs).epsilon(1e-6));
    CHECK(d.theorem1.holds);
    CHECK(d.verdict == "damping-enhancement possible");

    // Both modes sit well below zeta_l, so the floor's preconditions fail and
    // the (negative) m* value is reported but not applicable.
    CHECK_FALSE(d.preconditions_hold);
    CHECK_FALSE(d.mstar_applicable);
    CHECK(d.margin == doctest::Approx(td.park.mp - w.mstar).epsilon(1e-9));
  }
}

TEST_CASE("zeta window is nonempty exactly when D_u D_l clears D*") {
  ts::Rng rng(808);
  int compared = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const double mag = rng.uniform(0.5, 8.0);
    const double re = -rng.uniform(0.0, 0.2) * mag;
    const Cplx l(re, std::sqrt(std::max(0.0, mag * mag - re * re)));
    double m1 = rng.uniform(0.02, 0.2), m2 = rng.uniform(0.02, 0.2);
    double d1 = rng.uniform(1e-4, 0.5), d2 = rng.uniform(1e-4, 0.5);
    const ParkExtremes ex{std::max(m1, m2), std::min(m1, m2), std::max(d1, d2),
                          std::min(d1, d2)};
    double g1 = rng.uniform(0.3, 20.0), g2 = rng.uniform(0.3, 20.0);
    const double gl = std::min(g1, g2), gu = std::max(g1, g2);

    DesignVariables dv = design_variables(l, ex, gl, gu);
    const double prod = ex.D_u * ex.D_l;
    if (std::abs(prod - dv.Dstar) < 1e-9 * dv.Dstar) continue;  // skip near-ties
    CHECK((dv.zeta_l < dv.zeta_u) == (prod < dv.Dstar));
    ++compared;
  }
  CHECK(compared >= 350);
}

TEST_CASE("hermitian split is exact and its top eigenvalue bounds the quotient") {
  ToyDesign td = toy_designs();
  NetworkCase cse = load_case_file(ts::toy_path());
  JacobianSet jac = build_jacobians(kron_reduce(cse));
  AsymptoticSet aset =
      asymptotic_matrices(jac, td.park, td.designs[0].lambda, td.park.mp);

  HermitianSplit hs = hermitian_part(aset.Theta1);
  CHECK((hs.herm - hs.herm.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((hs.skew + hs.skew.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((hs.herm + hs.skew - aset.Theta1).cwiseAbs().maxCoeff() <
        1e-14 * aset.Theta1.cwiseAbs().maxCoeff());

  Eigen::SelfAdjointEigenSolver<CMat> es(hs.herm);
  const double lmax = es.eigenvalues().maxCoeff();

  ts::Rng rng(31);
  for (int rep = 0; rep < 1000; ++rep) {
    CVec x(aset.Theta1.rows());
    for (int i = 0; i < x.size(); ++i)
      x(i) = Cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    x.normalize();
    const double quotient = (x.adjoint() * aset.Theta1 * x)(0).real();
    CHECK(quotient <= lmax + 1e-10);
  }
}

TEST_CASE("design artifact keys every mode and encodes the infinities") {
  ToyDesign td = toy_designs();
  nlohmann::json body = nlohmann::json::parse(design_json(td.designs, td.park.mp));
  CHECK(body["mp"].get<double>() == doctest::Approx(td.park.mp));
  REQUIRE(body["modes"].contains("4"));
  REQUIRE(body["modes"].contains("5"));
  CHECK(body["modes"].size() == 2);
  CHECK(body["modes"]["4"]["verdict"] == "damping-enhancement possible");
  CHECK(body["max_mstar"].is_null());  // no applicable floor on this case
  CHECK(body["max_mstar_lim"].get<double>() ==
        doctest::Approx(0.001094114689).epsilon(1e-6));

  // An infinite zeta_u serializes as the string "inf" rather than breaking JSON.
  ModeDesign inf_case = td.designs[0];
  inf_case.vars.zeta_u = std::numeric_limits<double>::infinity();
  inf_case.vars.zeta_u_finite = false;
  nlohmann::json one = nlohmann::json::parse(design_json({inf_case}, td.park.mp));
  CHECK(one["modes"]["4"]["zeta_u"].is_string());
  CHECK(one["modes"]["4"]["zeta_u"] == "inf");
}
