#include "gridform/design.hpp"

#include "gridform/io.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace gridform {

HermitianSplit hermitian_part(const CMat& C) {
  HermitianSplit hs;
  hs.herm = 0.5 * (C + C.adjoint().eval());
  hs.skew = 0.5 * (C - C.adjoint().eval());
  return hs;
}

namespace {

double lambda_max_herm(const CMat& C) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(C).herm);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

Theorem1Result theorem1_condition(const AsymptoticSet& aset, double mp) {
  Theorem1Result r;
  r.lmax_theta1h = lambda_max_herm(aset.Theta1);
  r.lmax_theta2h = lambda_max_herm(aset.Theta2);
  r.lhs = mp * r.lmax_theta1h + r.lmax_theta2h;
  r.holds = r.lhs > 0.0;
  return r;
}

DesignVariables design_variables(Cplx lambda, const ParkExtremes& ex, double gamma_l,
                                 double gamma_u) {
  if (!(gamma_l > 0.0) || !(gamma_u > 0.0))
    throw ValidationError("design variables need positive grid-strength bounds "
                          "(gamma_l = " + io::fmt(gamma_l) + ", gamma_u = " +
                          io::fmt(gamma_u) + ")");
  const double a = std::abs(lambda);
  const double ratio = gamma_u / gamma_l;
  const double denom = 1.0 / gamma_u + 4.0 * a * a * ex.M_l;

  DesignVariables dv;
  dv.Dstar = ex.M_u * denom / ratio;
  dv.zeta_l = 2.0 * a * ex.D_u * ratio * ratio * ratio / denom;
  if (ex.D_l > 0.0) {
    dv.zeta_u = 2.0 * a * ex.M_u * ratio * ratio / ex.D_l;
    dv.zeta_u_finite = true;
  } else {
    dv.zeta_u = std::numeric_limits<double>::infinity();
    dv.zeta_u_finite = false;
  }
  return dv;
}

MstarResult mstar(Cplx lambda, double zeta, const ParkExtremes& ex, double gamma_u,
                  double gamma_l) {
  MstarResult r;
  r.vars = design_variables(lambda, ex, gamma_l, gamma_u);
  r.preconditions_hold = (ex.D_u * ex.D_l < r.vars.Dstar) &&
                         (r.vars.zeta_l < zeta) && (zeta < r.vars.zeta_u);

  const double a = std::abs(lambda);
  const double ratio = gamma_u / gamma_l;
  const double num = (1.0 + 4.0 * a * a * ex.M_l * gamma_u) * (zeta - r.vars.zeta_l);
  // D_l * zeta_u = 2|lambda| M_u (gamma_u/gamma_l)^2 analytically, so the
  // D_l -> 0 limit of the denominator stays finite; use it when D_l = 0.
  const double den = (ex.D_l > 0.0)
                         ? gamma_u * gamma_u * ex.D_l * (r.vars.zeta_u - zeta)
                         : gamma_u * gamma_u * 2.0 * a * ex.M_u * ratio * ratio;
  if (den == 0.0) {
    // zeta sits exactly at zeta_u: the floor diverges.
    r.mstar = (num == 0.0) ? 0.0
                           : std::copysign(std::numeric_limits<double>::infinity(), num);
  } else {
    r.mstar = num / den;
  }
  r.applicable = r.preconditions_hold && r.mstar > 0.0;
  return r;
}

double mstar_limit(Cplx lambda, double zeta, double M_l, double M_u, double gamma_u) {
  const double a = std::abs(lambda);
  if (!(a > 0.0) || !(M_u > 0.0) || !(gamma_u > 0.0))
    throw ValidationError("mstar_limit needs |lambda|, M_u, gamma_u all positive");
  return (1.0 + 4.0 * a * a * M_l * gamma_u) * zeta / (2.0 * a * M_u * gamma_u * gamma_u);
}

std::vector<ModeDesign> evaluate_design(const JacobianSet& jac, const DevicePark& park,
                                        const std::vector<Mode>& modes) {
  const ParkExtremes ex = park_extremes(park);
  const auto [gl, gu] = gamma_bounds(jac);

  std::vector<ModeDesign> out;
  for (const Mode& m : modes) {
    if (m.klass != "inter-area") continue;
    ModeDesign d;
    d.mode_id = m.mode_id;
    d.lambda = m.lambda;
    d.zeta = m.damping;

    AsymptoticSet as = asymptotic_matrices(jac, park, m.lambda, park.mp);
    d.theorem1 = theorem1_condition(as, park.mp);

    MstarResult ms = mstar(m.lambda, m.damping, ex, gu, gl);
    d.vars = ms.vars;
    d.preconditions_hold = ms.preconditions_hold;
    d.mstar = ms.mstar;
    d.mstar_applicable = ms.applicable;
    d.margin = park.mp - ms.mstar;
    d.mstar_lim = mstar_limit(m.lambda, m.damping, ex.M_l, ex.M_u, gu);
    d.verdict = d.theorem1.holds ? "damping-enhancement possible"
                                 : "damping-enhancement excluded";
    out.push_back(d);
  }
  return out;
}

std::string design_json(const std::vector<ModeDesign>& designs, double mp) {
  using ordered_json = nlohmann::ordered_json;
  ordered_json root;
  root["mp"] = mp;

  ordered_json modes = ordered_json::object();
  double max_mstar = -std::numeric_limits<double>::infinity();
  double max_mstar_lim = -std::numeric_limits<double>::infinity();
  bool any = false, any_applicable = false;
  for (const ModeDesign& d : designs) {
    ordered_json jm;
    jm["lambda_re"] = d.lambda.real();
    jm["lambda_im"] = d.lambda.imag();
    jm["zeta"] = d.zeta;
    jm["lmax_theta1h"] = d.theorem1.lmax_theta1h;
    jm["lmax_theta2h"] = d.theorem1.lmax_theta2h;
    jm["theorem1_lhs"] = d.theorem1.lhs;
    jm["theorem1_holds"] = d.theorem1.holds;
    jm["Dstar"] = d.vars.Dstar;
    jm["zeta_l"] = d.vars.zeta_l;
    jm["zeta_u"] = d.vars.zeta_u_finite ? ordered_json(d.vars.zeta_u)
                                        : ordered_json("inf");
    jm["preconditions_hold"] = d.preconditions_hold;
    jm["mstar"] = d.mstar;
    jm["mstar_applicable"] = d.mstar_applicable;
    jm["margin"] = d.margin;
    jm["mstar_lim"] = d.mstar_lim;
    jm["verdict"] = d.verdict;
    modes[std::to_string(d.mode_id)] = jm;
    any = true;
    max_mstar_lim = std::max(max_mstar_lim, d.mstar_lim);
    if (d.mstar_applicable) {
      any_applicable = true;
      max_mstar = std::max(max_mstar, d.mstar);
    }
  }
  root["modes"] = modes;
  // The governing bound depends on which preconditions a planner trusts, so
  // both maxima are listed side by side without picking one.
  root["max_mstar"] = any_applicable ? ordered_json(max_mstar) : ordered_json(nullptr);
  root["max_mstar_lim"] = any ? ordered_json(max_mstar_lim) : ordered_json(nullptr);
  return root.dump(2) + "\n";
}

}  // namespace gridform
