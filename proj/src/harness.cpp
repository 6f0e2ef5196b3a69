#include "gridform/harness.hpp"

#include "gridform/design.hpp"
#include "gridform/devices.hpp"
#include "gridform/io.hpp"
#include "gridform/modal.hpp"
#include "gridform/netmodel.hpp"
#include "gridform/ringdown.hpp"
#include "gridform/sensitivity.hpp"
#include "gridform/statespace.hpp"
#include "gridform/sweep.hpp"
#include "gridform/version.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>

namespace gridform {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate_common(const RunConfig& cfg) {
  if (!(cfg.band_lo < cfg.band_hi))
    throw ValidationError("inter-area band is empty: [" + io::fmt(cfg.band_lo) +
                          ", " + io::fmt(cfg.band_hi) + "] Hz");
  if (!(cfg.kernel_tol > 0.0))
    throw ValidationError("kernel tolerance must be positive");
}

struct LoadedCase {
  NetworkCase cse;
  std::string hash_hex;
  ReducedNetwork red;
  JacobianSet jac;
  DevicePark park;
};

LoadedCase load_all(const RunConfig& cfg) {
  validate_common(cfg);
  if (cfg.case_path.empty())
    throw ValidationError("no case file given (--case is required)");
  LoadedCase lc;
  lc.cse = load_case_file(cfg.case_path);
  lc.hash_hex = io::hex64(io::fnv1a64(lc.cse.raw_text));
  lc.red = kron_reduce(lc.cse);
  lc.jac = build_jacobians(lc.red);
  lc.park = build_park(lc.cse);
  return lc;
}

std::vector<Mode> analyzed_modes(const LoadedCase& lc, const RunConfig& cfg) {
  StateMatrix sm = assemble_state_matrix(lc.jac, lc.park);
  std::vector<Mode> modes = eigen_modes(sm);
  refine_modes(modes, lc.jac, lc.park, cfg.kernel_tol);
  classify_inter_area(modes, cfg.band_lo, cfg.band_hi);
  return modes;
}

// version / case_sha / config fields first, then the body's own keys.
std::string wrap_json(const std::string& body, const RunConfig& cfg,
                      const std::string& hash_hex) {
  ordered_json root;
  root["version"] = kVersion;
  root["case_sha"] = hash_hex;
  root["config"] = ordered_json::parse(config_echo(cfg));
  ordered_json parsed = ordered_json::parse(body);  // keep alive across items()
  for (auto& [k, v] : parsed.items()) root[k] = std::move(v);
  return root.dump(2) + "\n";
}

std::string csv_with_header(const std::string& table, const RunConfig& cfg,
                            const std::string& hash_hex) {
  return io::artifact_header(hash_hex, config_echo(cfg)) + table;
}

std::vector<double> sweep_axis(const RunConfig& cfg) {
  if (cfg.sweep_points < 1)
    throw ValidationError("sweep needs at least one grid point (--points)");
  if (cfg.sweep_points == 1) {
    if (cfg.sweep_from != cfg.sweep_to)
      throw ValidationError("a single-point sweep needs --from equal to --to");
    return {cfg.sweep_from};
  }
  std::vector<double> vals(static_cast<size_t>(cfg.sweep_points));
  if (cfg.sweep_log) {
    if (!(cfg.sweep_from > 0.0) || !(cfg.sweep_to > 0.0))
      throw ValidationError("geometric sweep axes need positive endpoints");
    const double la = std::log(cfg.sweep_from), lb = std::log(cfg.sweep_to);
    for (int i = 0; i < cfg.sweep_points; ++i)
      vals[static_cast<size_t>(i)] =
          std::exp(la + (lb - la) * i / (cfg.sweep_points - 1));
  } else {
    for (int i = 0; i < cfg.sweep_points; ++i)
      vals[static_cast<size_t>(i)] =
          cfg.sweep_from +
          (cfg.sweep_to - cfg.sweep_from) * i / (cfg.sweep_points - 1);
  }
  vals.front() = cfg.sweep_from;  // pin the endpoints exactly
  vals.back() = cfg.sweep_to;
  return vals;
}

}  // namespace

std::string config_echo(const RunConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  j["case"] = cfg.case_path;
  j["band_lo"] = cfg.band_lo;
  j["band_hi"] = cfg.band_hi;
  j["kernel_tol"] = cfg.kernel_tol;
  j["slow_threshold"] = cfg.slow_threshold;
  j["sweep_param"] = cfg.sweep_param;
  j["sweep_from"] = cfg.sweep_from;
  j["sweep_to"] = cfg.sweep_to;
  j["sweep_points"] = cfg.sweep_points;
  j["sweep_log"] = cfg.sweep_log;
  j["mode_id"] = cfg.mode_id;
  j["fd_step"] = cfg.fd_step;
  ordered_json pert = ordered_json::array();
  for (const auto& [name, amp] : cfg.perturb) pert.push_back(name + "=" + io::fmt(amp));
  j["perturb"] = pert;
  j["horizon"] = cfg.horizon;
  j["dt"] = cfg.dt;
  j["outdir"] = cfg.outdir;
  j["seed"] = cfg.seed;
  return j.dump();
}

// ---- analyze ----------------------------------------------------------------------

ArtifactSet analyze_artifacts(const RunConfig& cfg) {
  LoadedCase lc = load_all(cfg);
  std::vector<Mode> modes = analyzed_modes(lc, cfg);

  ArtifactSet out;
  out.files.emplace_back("modes.csv",
                         csv_with_header(modes_csv(modes), cfg, lc.hash_hex));

  const AssumptionReport rep = validate_assumptions(lc.jac);
  const TimescaleReport ts = timescale_check(lc.park);
  ordered_json body;
  body["interior_condition_number"] = lc.red.interior_cond;
  body["gamma_l"] = lc.jac.gamma_l;
  body["gamma_u"] = lc.jac.gamma_u;
  body["schur_lambda_min"] = rep.schur_lambda_min;
  body["positive_definite"] = rep.positive_definite;
  body["smin_kgi_kgit"] = rep.smin_kgi_kgit;
  body["smin_kigt_kig"] = rep.smin_kigt_kig;
  body["couplings_full_rank"] = rep.couplings_full_rank;
  body["more_gfm_than_sg"] = rep.more_gfm_than_sg;
  body["pass"] = rep.pass;
  body["timescale_margin"] = ts.margin;
  body["timescale_ok"] = ts.ok;
  ordered_json slow = ordered_json::object();
  for (const Mode& m : modes) {
    SlowModeReport sr = slow_mode_check(m, lc.jac, lc.park, cfg.slow_threshold);
    slow[std::to_string(m.mode_id)] = {{"ratio", sr.ratio}, {"valid", sr.valid}};
  }
  body["slow_mode_ratios"] = slow;
  out.files.emplace_back("assumptions.json",
                         wrap_json(body.dump(), cfg, lc.hash_hex));

  int inter = 0;
  for (const Mode& m : modes)
    if (m.klass == "inter-area") ++inter;
  out.summary = "modes: " + std::to_string(modes.size()) + " total, " +
                std::to_string(inter) + " inter-area\n" +
                std::string("assumptions: ") + (rep.pass ? "pass" : "fail") + "\n";
  if (!ts.ok)
    out.summary += "warning: GFM filter timescale margin " + io::fmt(ts.margin) +
                   " < 10; quasi-steady reduction is questionable\n";
  return out;
}

// ---- sweep ------------------------------------------------------------------------

ArtifactSet sweep_artifacts(const RunConfig& cfg) {
  LoadedCase lc = load_all(cfg);
  const std::vector<double> axis = sweep_axis(cfg);

  SweepResult sr;
  if (cfg.sweep_param == "droop")
    sr = sweep_droop(lc.cse, axis);
  else if (cfg.sweep_param == "size")
    sr = sweep_size(lc.cse, axis);
  else
    throw ValidationError("unknown sweep parameter '" + cfg.sweep_param +
                          "' (expected droop or size)");

  ArtifactSet out;
  out.files.emplace_back("sweep.csv",
                         csv_with_header(sweep_csv(sr), cfg, lc.hash_hex));

  std::string rev_body;
  if (sr.values.size() >= 5) {
    rev_body = reversal_json(sr, detect_reversal(sr));
  } else {
    ordered_json j;
    j["param_name"] = sr.param_name;
    j["modes"] = ordered_json::object();
    j["note"] = "reversal detection needs at least 5 grid points";
    rev_body = j.dump(2) + "\n";
  }
  out.files.emplace_back("reversal.json", wrap_json(rev_body, cfg, lc.hash_hex));

  out.summary = "sweep: " + sr.param_name + " over " +
                std::to_string(sr.values.size()) + " points, " +
                std::to_string(sr.loci.size()) + " mode loci\n";
  for (const std::string& w : sr.warnings) out.summary += "warning: " + w + "\n";
  return out;
}

// ---- sensitivity ------------------------------------------------------------------

ArtifactSet sensitivity_artifacts(const RunConfig& cfg) {
  LoadedCase lc = load_all(cfg);
  if (cfg.mode_id <= 0)
    throw ValidationError("sensitivity requires --mode <id>");
  std::vector<Mode> modes = analyzed_modes(lc, cfg);

  const Mode* target = nullptr;
  for (const Mode& m : modes)
    if (m.mode_id == cfg.mode_id) target = &m;
  if (!target)
    throw ValidationError("no mode with id " + std::to_string(cfg.mode_id) +
                          " (case has " + std::to_string(modes.size()) + " modes)");

  std::vector<SensitivityReport> reps;
  reps.push_back(sensitivity_report(lc.jac, lc.park, *target, cfg.fd_step));

  ArtifactSet out;
  out.files.emplace_back("sensitivity.csv",
                         csv_with_header(sensitivity_csv(reps), cfg, lc.hash_hex));
  out.summary = "mode " + std::to_string(cfg.mode_id) + ": dlambda/dmp = " +
                io::fmt_complex(reps[0].sens.analytic.real(),
                                reps[0].sens.analytic.imag()) +
                " (fd rel err " + io::fmt(reps[0].rel_err) + ")\n";
  return out;
}

// ---- check-design -----------------------------------------------------------------

ArtifactSet design_artifacts(const RunConfig& cfg) {
  LoadedCase lc = load_all(cfg);
  std::vector<Mode> modes = analyzed_modes(lc, cfg);
  std::vector<ModeDesign> designs = evaluate_design(lc.jac, lc.park, modes);

  if (cfg.mode_id > 0) {
    std::vector<ModeDesign> filtered;
    for (const ModeDesign& d : designs)
      if (d.mode_id == cfg.mode_id) filtered.push_back(d);
    if (filtered.empty())
      throw ValidationError("mode " + std::to_string(cfg.mode_id) +
                            " is not an inter-area mode of this case");
    designs = std::move(filtered);
  }

  ArtifactSet out;
  out.files.emplace_back(
      "design.json",
      wrap_json(design_json(designs, lc.park.mp), cfg, lc.hash_hex));
  out.summary = "check-design: " + std::to_string(designs.size()) +
                " inter-area mode(s) evaluated\n";
  for (const ModeDesign& d : designs)
    out.summary += "mode " + std::to_string(d.mode_id) + ": " + d.verdict +
                   " (lhs " + io::fmt(d.theorem1.lhs) + ")\n";
  return out;
}

// ---- ringdown ---------------------------------------------------------------------

ArtifactSet ringdown_artifacts(const RunConfig& cfg) {
  LoadedCase lc = load_all(cfg);
  if (cfg.perturb.empty())
    throw ValidationError("ringdown requires at least one --perturb state=amplitude");
  if (!(cfg.horizon > 0.0) || !(cfg.dt > 0.0))
    throw ValidationError("ringdown requires positive --horizon and --dt");

  StateMatrix sm = assemble_state_matrix(lc.jac, lc.park);
  Vec x0 = Vec::Zero(sm.A.rows());
  for (const auto& [name, amp] : cfg.perturb) {
    int idx = -1;
    for (size_t k = 0; k < sm.state_labels.size(); ++k)
      if (sm.state_labels[k] == name) idx = static_cast<int>(k);
    if (idx < 0)
      throw ValidationError("unknown state '" + name +
                            "' in --perturb (labels are delta_<id>, omega_<id>)");
    x0(idx) += amp;
  }

  Trajectory traj = simulate(lc.cse, x0, cfg.horizon, cfg.dt);

  ArtifactSet out;
  out.files.emplace_back("trajectory.csv",
                         csv_with_header(trajectory_csv(traj), cfg, lc.hash_hex));
  out.summary = "ringdown: " + std::to_string(traj.t.size()) + " samples over " +
                io::fmt(traj.t(traj.t.size() - 1)) + " s\n";
  for (const std::string& e : traj.events) out.summary += "event: " + e + "\n";
  return out;
}

// ---- selftest ---------------------------------------------------------------------

namespace {

struct Check {
  std::string name;
  std::function<void()> fn;  // throws std::runtime_error with detail on failure
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

void expect_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol))
    throw std::runtime_error(what + ": got " + io::fmt(got) + ", want " +
                             io::fmt(want) + " +- " + io::fmt(tol));
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53-bit mantissa draw; identical across platforms for a fixed seed.
  const double u = std::ldexp(static_cast<double>(rng() >> 11), -53);
  return lo + (hi - lo) * u;
}

JacobianSet tiny_jacobian() {
  // 1 SG + 1 GFM, coupling 0.5, grounding 0.5 at both ends: the Jacobian comes
  // out as K_gg = K_ii = 1, K_gi = K_ig = -0.5 exactly.
  ReducedNetwork red;
  red.B_red.resize(2, 2);
  red.B_red << 1.0, -0.5, -0.5, 1.0;
  red.E = Vec::Ones(2);
  red.delta0 = Vec::Zero(2);
  red.node_ids = {"g1", "i1"};
  red.n_g = 1;
  red.n_i = 1;
  return build_jacobians(red);
}

DevicePark tiny_park(double mp) {
  DevicePark park;
  park.M = Vec::Ones(1);
  park.D = Vec::Constant(1, 0.1);
  park.S_mva = Vec::Constant(1, 100.0);
  park.mp_hat = Vec::Constant(1, mp);
  park.mq_hat = Vec::Zero(1);
  park.tau = Vec::Constant(1, 0.02);
  park.base_mva = 100.0;
  park.omega0_rad_s = 2.0 * kPi * 60.0;
  park.mp = mp;
  return park;
}

std::vector<Check> build_selftest(const RunConfig& cfg) {
  std::vector<Check> checks;

  checks.push_back({"droop-conversion", [] {
    expect_near(droop_from_setting(0.05, 100.0, 100.0), 0.05, 1e-15, "S=base");
    expect_near(droop_from_setting(0.05, 200.0, 100.0), 0.025, 1e-15, "S=2base");
    expect_near(droop_from_setting(0.03, 50.0, 100.0), 0.06, 1e-15, "S=base/2");
    expect_near(droop_from_setting(0.03, 100.0, 100.0), 0.03, 1e-15, "S=base");
    expect_near(droop_from_setting(0.03, 200.0, 100.0), 0.015, 1e-15, "S=2base");
  }});

  checks.push_back({"droop-round-trip", [] {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
      const double mh = uniform(rng, 0.002, 0.2);
      const double s = uniform(rng, 0.2, 500.0);
      const double back = setting_from_droop(droop_from_setting(mh, s, 100.0), s, 100.0);
      expect(std::abs(back - mh) <= 1e-14, "round-trip drift " + io::fmt(back - mh));
    }
  }});

  checks.push_back({"park-extremes", [] {
    DevicePark park;
    park.M.resize(2);
    park.M << 2.0, 5.0;
    park.D.resize(2);
    park.D << 0.1, 0.4;
    ParkExtremes ex = park_extremes(park);
    expect(ex.M_u == 5.0 && ex.M_l == 2.0 && ex.D_u == 0.4 && ex.D_l == 0.1,
           "extremes of {2,5} x {0.1,0.4}");
    std::swap(park.M(0), park.M(1));
    std::swap(park.D(0), park.D(1));
    ParkExtremes ex2 = park_extremes(park);
    expect(ex2.M_u == ex.M_u && ex2.M_l == ex.M_l && ex2.D_u == ex.D_u &&
           ex2.D_l == ex.D_l, "permutation invariance");
  }});

  checks.push_back({"timescale-margin", [] {
    DevicePark park;
    park.M = Vec::Ones(1);
    park.D = Vec::Constant(1, 0.1);  // D/M = 0.1
    park.tau = Vec::Constant(1, 0.02);
    TimescaleReport ts = timescale_check(park);
    expect_near(ts.margin, 500.0, 1e-9, "tau=0.02 margin");
    expect(ts.ok, "margin 500 should pass");
    park.tau = Vec::Constant(1, 5.0);
    ts = timescale_check(park);
    expect_near(ts.margin, 2.0, 1e-12, "tau=5 margin");
    expect(!ts.ok, "margin 2 should warn");
  }});

  checks.push_back({"two-node-jacobian", [] {
    ReducedNetwork red;
    red.B_red.resize(2, 2);
    red.B_red << 1.0, -1.0, -1.0, 1.0;
    red.E = Vec::Ones(2);
    red.delta0 = Vec::Zero(2);
    red.node_ids = {"g1", "i1"};
    red.n_g = 1;
    red.n_i = 1;
    JacobianSet jac = build_jacobians(red);
    expect(std::abs(jac.K(0, 0) - 1.0) < 1e-15 && std::abs(jac.K(0, 1) + 1.0) < 1e-15 &&
           std::abs(jac.K(1, 0) + 1.0) < 1e-15 && std::abs(jac.K(1, 1) - 1.0) < 1e-15,
           "unit-coupling K");
    // Add a 0.5 shunt at the second node.
    red.B_red(1, 1) += 0.5;
    jac = build_jacobians(red);
    expect(std::abs(jac.K(1, 1) - 1.5) < 1e-15, "shunted K_22");
    expect(std::abs(jac.diag_ii(0) - 1.5) < 1e-15,
           "the shunt lands in the diagonal remainder");

    // Inside a block the split separates exchange terms from anchoring: with
    // i1 tied to g1 (0.6) and to i2 (1.0), and a 0.5 shunt at i2, the GFM
    // Laplacian is the exchange and diag_ii keeps anchor + shunt.
    ReducedNetwork r3;
    r3.B_red.resize(3, 3);
    r3.B_red << 0.6, -0.6, 0.0,
               -0.6,  1.6, -1.0,
                0.0, -1.0,  1.5;
    r3.E = Vec::Ones(3);
    r3.delta0 = Vec::Zero(3);
    r3.node_ids = {"g1", "i1", "i2"};
    r3.n_g = 1;
    r3.n_i = 2;
    JacobianSet j3 = build_jacobians(r3);
    expect(std::abs(j3.lap_ii(0) - 1.0) < 1e-15 && std::abs(j3.lap_ii(1) - 1.0) < 1e-15,
           "GFM exchange Laplacian");
    expect(std::abs(j3.diag_ii(0) - 0.6) < 1e-15 && std::abs(j3.diag_ii(1) - 0.5) < 1e-15,
           "anchor + shunt on the diagonal");
    auto [gl3, gu3] = gamma_bounds(j3);
    expect(std::abs(gl3 - 0.5) < 1e-15 && std::abs(gu3 - 2.6) < 1e-12,
           "grid-strength bounds of the 3-node case");
  }});

  checks.push_back({"gamma-bounds", [] {
    JacobianSet jac;
    jac.n_g = 0;
    jac.n_i = 2;
    jac.Kii.resize(2, 2);
    jac.Kii << 1.3, -0.5, -0.5, 1.5;
    jac.diag_ii.resize(2);
    jac.diag_ii << 0.8, 1.0;
    jac.lap_ii.resize(2);
    jac.lap_ii << 0.5, 0.5;
    jac.gamma_l = jac.diag_ii.minCoeff();
    jac.gamma_u = (jac.diag_ii + 2.0 * jac.lap_ii).maxCoeff();
    auto [gl, gu] = gamma_bounds(jac);
    expect_near(gl, 0.8, 1e-15, "gamma_l");
    expect_near(gu, 2.0, 1e-15, "gamma_u");
    // K_ii = c I collapses the sandwich.
    jac.Kii = 2.5 * Mat::Identity(2, 2);
    jac.diag_ii = Vec::Constant(2, 2.5);
    jac.lap_ii = Vec::Zero(2);
    jac.gamma_l = 2.5;
    jac.gamma_u = 2.5;
    auto [gl2, gu2] = gamma_bounds(jac);
    expect(gl2 == 2.5 && gu2 == 2.5, "identity-scaled K_ii");
  }});

  checks.push_back({"state-matrix-canonical", [] {
    JacobianSet jac = tiny_jacobian();
    StateMatrix sm = assemble_state_matrix(jac, tiny_park(1.0));
    Mat want(3, 3);
    want << 0, 1, 0, -1, -0.1, 0.5, 0.5, 0, -1;
    expect((sm.A - want).cwiseAbs().maxCoeff() < 1e-15, "canonical 3x3 A");
    // Characteristic polynomial lambda^3 + 1.1 lambda^2 + 1.1 lambda + 0.75.
    for (const Mode& m : eigen_modes(sm)) {
      const Cplx l = m.lambda;
      const Cplx p = l * l * l + 1.1 * l * l + 1.1 * l + 0.75;
      expect(std::abs(p) < 1e-9, "char-poly residual " + io::fmt(std::abs(p)));
      LambdaEval ev = lambda_matrix(jac, tiny_park(1.0), l);
      expect(std::abs(ev.Lambda(0, 0)) < 1e-9,
             "pencil residual " + io::fmt(std::abs(ev.Lambda(0, 0))));
    }
  }});

  checks.push_back({"zero-droop-limit", [] {
    JacobianSet jac = tiny_jacobian();
    StateMatrix sm = assemble_state_matrix(jac, tiny_park(0.0));
    expect(sm.A.row(2).cwiseAbs().maxCoeff() == 0.0, "third block row vanishes");
    int zeros = 0;
    for (const Mode& m : eigen_modes(sm)) {
      if (std::abs(m.lambda) < 1e-12) {
        ++zeros;
      } else {
        const Cplx p = m.lambda * m.lambda + 0.1 * m.lambda + 1.0;
        expect(std::abs(p) < 1e-9, "SG-root residual");
      }
    }
    expect(zeros == 1, "one zero eigenvalue per GFM");
  }});

  checks.push_back({"pencil-at-zero", [] {
    JacobianSet jac = tiny_jacobian();
    LambdaEval a = lambda_matrix(jac, tiny_park(1.0), Cplx(0.0, 0.0));
    LambdaEval b = lambda_matrix(jac, tiny_park(3.0), Cplx(0.0, 0.0));
    expect((a.Lambda - b.Lambda).cwiseAbs().maxCoeff() < 1e-12,
           "Lambda(0) must not depend on m_p");
  }});

  checks.push_back({"mode-quantities", [] {
    StateMatrix sm;
    sm.n_g = 1;
    sm.n_i = 1;
    sm.A.resize(3, 3);
    sm.A << -0.3, 4.0, 0.0, -4.0, -0.3, 0.0, 0.0, 0.0, -1.0;
    sm.state_labels = {"delta_g1", "omega_g1", "delta_i1"};
    std::vector<Mode> modes = eigen_modes(sm);
    expect(modes.size() == 2, "one pair + one real");
    expect(modes[0].lambda.imag() == 0.0, "real mode first (f = 0)");
    expect_near(modes[0].damping, 1.0, 1e-12, "real mode zeta = 100%");
    expect_near(modes[0].freq_hz, 0.0, 1e-15, "real mode f = 0");
    expect_near(modes[1].freq_hz, 0.63661977236758, 1e-9, "f of -0.3+4j");
    expect_near(100.0 * modes[1].damping, 7.479, 1e-3, "zeta% of -0.3+4j");

    StateMatrix rot;
    rot.n_g = 1;
    rot.n_i = 0;
    rot.A.resize(2, 2);
    rot.A << 0.0, 2.0 * kPi, -2.0 * kPi, 0.0;
    rot.state_labels = {"delta_g1", "omega_g1"};
    std::vector<Mode> m2 = eigen_modes(rot);
    expect(m2.size() == 1, "single pair");
    expect_near(m2[0].freq_hz, 1.0, 1e-12, "1 Hz mode");
    expect_near(m2[0].damping, 0.0, 1e-12, "undamped");
  }});

  checks.push_back({"classification-band", [] {
    std::vector<Mode> modes(3);
    modes[0].lambda = Cplx(-0.05, 2.0 * kPi * 0.5);
    modes[0].freq_hz = 0.5;
    modes[1].lambda = Cplx(-0.05, 2.0 * kPi * 1.5);
    modes[1].freq_hz = 1.5;
    modes[2].lambda = Cplx(-2.0, 0.0);
    modes[2].freq_hz = 0.0;
    classify_inter_area(modes, 0.1, 1.0);
    expect(modes[0].klass == "inter-area", "0.5 Hz inside band");
    expect(modes[1].klass == "local", "1.5 Hz outside band");
    expect(modes[2].klass == "real", "non-oscillatory mode");
  }});

  checks.push_back({"hermitian-split", [] {
    CMat C(2, 2);
    C << Cplx(1, 0), Cplx(2, 0), Cplx(2, 0), Cplx(3, 0);
    HermitianSplit hs = hermitian_part(C);
    expect((hs.herm - C).cwiseAbs().maxCoeff() == 0.0, "real symmetric: herm = C");
    expect(hs.skew.cwiseAbs().maxCoeff() == 0.0, "real symmetric: skew = 0");
    CMat S(2, 2);
    S << Cplx(0, 1), Cplx(0, 2), Cplx(0, 2), Cplx(0, 5);
    hs = hermitian_part(S);
    expect(hs.herm.cwiseAbs().maxCoeff() == 0.0, "i * symmetric: herm = 0");

    std::mt19937_64 rng(7);
    CMat R(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        R(r, c) = Cplx(uniform(rng, -1, 1), uniform(rng, -1, 1));
    hs = hermitian_part(R);
    expect((hs.herm + hs.skew - R).cwiseAbs().maxCoeff() < 1e-15, "exact recomposition");
    for (int k = 0; k < 100; ++k) {
      CVec x(4);
      for (int r = 0; r < 4; ++r) x(r) = Cplx(uniform(rng, -1, 1), uniform(rng, -1, 1));
      const Cplx q = (x.adjoint() * hs.herm * x)(0, 0);
      expect(std::abs(q.imag()) < 1e-13, "Hermitian quadratic form is real");
    }
  }});

  checks.push_back({"design-variables", [] {
    ParkExtremes ex{1.0, 1.0, 0.1, 0.1};
    DesignVariables dv = design_variables(Cplx(0.0, 1.0), ex, 1.0, 1.0);
    expect_near(dv.Dstar, 5.0, 1e-12, "D*");
    expect_near(dv.zeta_l, 0.04, 1e-12, "zeta_l");
    expect_near(dv.zeta_u, 20.0, 1e-12, "zeta_u");
    ParkExtremes ex0{1.0, 1.0, 0.1, 0.0};
    DesignVariables dv0 = design_variables(Cplx(0.0, 1.0), ex0, 1.0, 1.0);
    expect(!dv0.zeta_u_finite && std::isinf(dv0.zeta_u), "D_l = 0 flags zeta_u");
  }});

  checks.push_back({"droop-floor", [] {
    ParkExtremes ex{1.0, 1.0, 0.1, 0.1};
    const Cplx lam(0.0, 1.0);
    const DesignVariables dv = design_variables(lam, ex, 1.0, 1.0);
    MstarResult at_l = mstar(lam, dv.zeta_l, ex, 1.0, 1.0);
    expect(at_l.mstar == 0.0, "zeta = zeta_l gives m* = 0");
    MstarResult mid = mstar(lam, 0.05, ex, 1.0, 1.0);
    expect(mid.preconditions_hold, "preconditions at zeta = 0.05");
    expect_near(mid.mstar, 0.0250626566416, 1e-9, "m* at zeta = 0.05");
    MstarResult at_u = mstar(lam, dv.zeta_u, ex, 1.0, 1.0);
    expect(std::isinf(at_u.mstar) && at_u.mstar > 0, "zeta = zeta_u diverges");
    expect(!at_u.preconditions_hold, "zeta = zeta_u violates the strict window");
  }});

  checks.push_back({"droop-floor-limit", [] {
    expect_near(mstar_limit(Cplx(0.0, 1.0), 0.1, 1.0, 1.0, 1.0), 0.25, 1e-12,
                "m*_lim example");
    ParkExtremes ex{1.0, 1.0, 1e-9, 1e-9};
    MstarResult ms = mstar(Cplx(0.0, 1.0), 0.1, ex, 1.0, 1.0);
    expect_near(ms.mstar, mstar_limit(Cplx(0.0, 1.0), 0.1, 1.0, 1.0, 1.0), 1e-6,
                "vanishing-damping limit");
  }});

  checks.push_back({"expansion-decoupled", [] {
    JacobianSet jac = tiny_jacobian();
    jac.Kgi << 0.0;
    jac.Kig << 0.0;
    jac.K << 1.0, 0.0, 0.0, 1.0;
    AsymptoticCheck chk = asymptotic_check(jac, tiny_park(1.0), Cplx(-0.05, 0.7),
                                           {10.0, 100.0, 1000.0});
    for (const auto& r : chk.rows)
      expect(r.e_R == 0.0 && r.e_Theta == 0.0, "decoupled GFMs leave zero residuals");
  }});

  checks.push_back({"reversal-parabola", [] {
    SweepResult sr;
    sr.param_name = "droop";
    ModeLocus locus;
    locus.mode_id = 1;
    locus.klass = "inter-area";
    for (int i = 0; i <= 10; ++i) {
      const double p = 0.1 * i;
      sr.values.push_back(p);
      LocusPoint lp;
      lp.param = p;
      lp.damping = 1.0 - (p - 0.3) * (p - 0.3);
      lp.tracked = true;
      locus.points.push_back(lp);
    }
    sr.loci.push_back(locus);
    std::vector<ModeReversal> revs = detect_reversal(sr);
    expect(revs.size() == 1 && revs[0].interior, "interior maximum found");
    expect_near(revs[0].param_at_max, 0.3, 0.05, "vertex within half a grid step");
    expect_near(revs[0].zeta_max, 1.0, 1e-9, "peak damping");
  }});

  checks.push_back({"ringdown-estimator", [] {
    const int N = 2001;
    const double dt = 0.01;
    Trajectory traj;
    traj.labels = {"x"};
    traj.t.resize(N);
    traj.states.resize(N, 1);
    for (int i = 0; i < N; ++i) {
      const double t = i * dt;
      traj.t(i) = t;
      traj.states(i, 0) = std::exp(-0.3 * t) * std::sin(4.0 * t);
    }
    ModeEstimate est = estimate_mode(traj, "x");
    expect_near(est.f_hz, 0.63661977, 0.01, "f of exp(-0.3t) sin(4t)");
    expect_near(est.zeta, 0.07479, 0.005, "zeta of exp(-0.3t) sin(4t)");

    for (int i = 0; i < N; ++i) traj.states(i, 0) = std::exp(-traj.t(i));
    bool threw = false;
    try {
      estimate_mode(traj, "x");
    } catch (const NumericalError&) {
      threw = true;
    }
    expect(threw, "pure decay must be reported non-oscillatory");
  }});

  checks.push_back({"case-pipeline", [cfg] {
    RunConfig c = cfg;
    NetworkCase cse = load_case_file(c.case_path);
    const std::string s1 = serialize_case(cse);
    const std::string s2 = serialize_case(load_case_text(s1));
    expect(s1 == s2, "serialization fixpoint");

    ReducedNetwork red = kron_reduce(cse);
    JacobianSet jac = build_jacobians(red);
    DevicePark park = build_park(cse);
    StateMatrix sm = assemble_state_matrix(jac, park);
    std::vector<Mode> modes = eigen_modes(sm);
    refine_modes(modes, jac, park, c.kernel_tol);
    classify_inter_area(modes, c.band_lo, c.band_hi);
    int inter = 0;
    for (const Mode& m : modes) {
      expect(m.sigma_ratio < 1e-8, "pencil kernel ratio " + io::fmt(m.sigma_ratio));
      expect(std::max(m.residual_right, m.residual_left) < 1e-8,
             "eigen-residual " + io::fmt(std::max(m.residual_right, m.residual_left)));
      if (m.klass == "inter-area") ++inter;
    }
    expect(inter >= 1, "expected at least one inter-area mode");
    expect(validate_assumptions(jac).pass, "model assumptions");
    expect(timescale_check(park).ok, "timescale margin");
  }});

  checks.push_back({"jacobian-fd", [cfg] {
    NetworkCase cse = load_case_file(cfg.case_path);
    ReducedNetwork red = kron_reduce(cse);
    JacobianSet jac = build_jacobians(red);
    const int n = red.n_g + red.n_i;
    const double h = 1e-6;
    Mat K_fd(n, n);
    for (int j = 0; j < n; ++j) {
      Vec dp = red.delta0, dm = red.delta0;
      dp(j) += h;
      dm(j) -= h;
      K_fd.col(j) = (injections(red, dp) - injections(red, dm)) / (2.0 * h);
    }
    const double rel = (K_fd - jac.K).cwiseAbs().maxCoeff() /
                       jac.K.cwiseAbs().maxCoeff();
    expect(rel < 1e-6, "FD Jacobian relative error " + io::fmt(rel));
  }});

  return checks;
}

}  // namespace

ArtifactSet selftest_artifacts(const RunConfig& cfg) {
  validate_common(cfg);
  if (cfg.case_path.empty())
    throw ValidationError("selftest needs --case (exercises the full pipeline)");

  std::string log;
  int passed = 0, failed = 0;
  for (const Check& c : build_selftest(cfg)) {
    try {
      c.fn();
      log += "PASS " + c.name + "\n";
      ++passed;
    } catch (const std::exception& e) {
      log += "FAIL " + c.name + ": " + e.what() + "\n";
      ++failed;
    }
  }
  log += "selftest: " + std::to_string(passed) + "/" +
         std::to_string(passed + failed) + " passed\n";

  const std::string hash_hex =
      io::hex64(io::fnv1a64(io::read_file(cfg.case_path)));
  ArtifactSet out;
  out.files.emplace_back("selftest.txt",
                         io::artifact_header(hash_hex, config_echo(cfg)) + log);
  out.summary = log;
  out.exit_code = failed == 0 ? 0 : 2;
  return out;
}

// ---- dispatch ---------------------------------------------------------------------

int run_command(const RunConfig& cfg) {
  ArtifactSet out;
  if (cfg.command == "analyze")
    out = analyze_artifacts(cfg);
  else if (cfg.command == "sweep")
    out = sweep_artifacts(cfg);
  else if (cfg.command == "sensitivity")
    out = sensitivity_artifacts(cfg);
  else if (cfg.command == "check-design")
    out = design_artifacts(cfg);
  else if (cfg.command == "ringdown")
    out = ringdown_artifacts(cfg);
  else if (cfg.command == "selftest")
    out = selftest_artifacts(cfg);
  else
    throw ValidationError("unknown command '" + cfg.command + "'");

  std::filesystem::create_directories(cfg.outdir);
  for (const auto& [name, bytes] : out.files) {
    const std::string path = cfg.outdir + "/" + name;
    io::write_file(path, bytes);
    out.summary += "wrote " + path + "\n";
  }
  std::fputs(out.summary.c_str(), stdout);
  return out.exit_code;
}

}  // namespace gridform
