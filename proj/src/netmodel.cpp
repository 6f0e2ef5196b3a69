#include "gridform/netmodel.hpp"

#include "gridform/io.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace gridform {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---- checked JSON access --------------------------------------------------------
//
// nlohmann's own exceptions carry JSON-pointer-ish context only for operator[]
// misuse; we want every message to name the field path in case-file terms
// ("gfms[2].tau"), so access goes through these helpers.

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
  throw ValidationError("case parse error at " + path + ": " + what);
}

const ordered_json& req_member(const ordered_json& obj, const std::string& path,
                               const char* key) {
  if (!obj.is_object()) fail_field(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail_field(path + "." + key, "missing required field");
  return *it;
}

double req_num(const ordered_json& obj, const std::string& path, const char* key) {
  const ordered_json& v = req_member(obj, path, key);
  if (!v.is_number()) fail_field(path + "." + key, "expected a number");
  return v.get<double>();
}

double opt_num(const ordered_json& obj, const std::string& path, const char* key,
               double dflt) {
  if (!obj.is_object()) fail_field(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_number()) fail_field(path + "." + key, "expected a number");
  return it->get<double>();
}

std::string req_str(const ordered_json& obj, const std::string& path, const char* key) {
  const ordered_json& v = req_member(obj, path, key);
  if (!v.is_string()) fail_field(path + "." + key, "expected a string");
  return v.get<std::string>();
}

const ordered_json& req_array(const ordered_json& obj, const std::string& path,
                              const char* key) {
  const ordered_json& v = req_member(obj, path, key);
  if (!v.is_array()) fail_field(path + "." + key, "expected an array");
  return v;
}

std::string idx(const std::string& base, size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

}  // namespace

// ---- load_case ------------------------------------------------------------------

NetworkCase load_case_text(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is the 1-based byte offset of the failure; include it so the
    // offending line can be located in the source document.
    throw ValidationError("case parse error at byte " + std::to_string(e.byte) +
                          ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError("case parse error at $: expected an object");

  NetworkCase cse;
  cse.raw_text = text;
  cse.base_mva = req_num(doc, "$", "base_mva");
  if (!(cse.base_mva > 0.0))
    throw ValidationError("case parse error at $.base_mva: must be positive");
  cse.omega0_rad_s = opt_num(doc, "$", "omega0_rad_s", cse.omega0_rad_s);
  if (!(cse.omega0_rad_s > 0.0))
    throw ValidationError("case parse error at $.omega0_rad_s: must be positive");

  std::set<std::string> ids;  // buses and devices share one namespace
  auto claim_id = [&ids](const std::string& id, const std::string& path) {
    if (id.empty()) fail_field(path, "id must be non-empty");
    if (!ids.insert(id).second)
      throw ValidationError("duplicate id '" + id + "' at " + path);
  };

  const ordered_json& jbuses = req_array(doc, "$", "buses");
  for (size_t i = 0; i < jbuses.size(); ++i) {
    const std::string path = idx("buses", i);
    BusSpec b;
    b.id = req_str(jbuses[i], path, "id");
    claim_id(b.id, path + ".id");
    b.vm = opt_num(jbuses[i], path, "vm", 1.0);
    b.angle = opt_num(jbuses[i], path, "angle", 0.0);
    b.shunt_b = opt_num(jbuses[i], path, "shunt_b", 0.0);
    cse.buses.push_back(b);
  }
  std::set<std::string> bus_ids;
  for (const auto& b : cse.buses) bus_ids.insert(b.id);

  auto check_bus_ref = [&bus_ids](const std::string& ref, const std::string& path) {
    if (!bus_ids.count(ref))
      throw ValidationError("dangling reference '" + ref + "' at " + path +
                            ": no such bus");
  };

  const ordered_json& jbranches = req_array(doc, "$", "branches");
  for (size_t i = 0; i < jbranches.size(); ++i) {
    const std::string path = idx("branches", i);
    BranchSpec br;
    br.from = req_str(jbranches[i], path, "from");
    br.to = req_str(jbranches[i], path, "to");
    check_bus_ref(br.from, path + ".from");
    check_bus_ref(br.to, path + ".to");
    if (br.from == br.to) fail_field(path, "branch endpoints must differ");
    br.b = req_num(jbranches[i], path, "b");
    if (!(br.b > 0.0)) fail_field(path + ".b", "series susceptance must be positive");
    cse.branches.push_back(br);
  }

  if (doc.contains("loads")) {
    const ordered_json& jloads = req_array(doc, "$", "loads");
    for (size_t i = 0; i < jloads.size(); ++i) {
      const std::string path = idx("loads", i);
      LoadSpec ld;
      ld.bus = req_str(jloads[i], path, "bus");
      check_bus_ref(ld.bus, path + ".bus");
      ld.b = opt_num(jloads[i], path, "b", 0.0);
      ld.p_mw = opt_num(jloads[i], path, "p_mw", 0.0);
      if (ld.p_mw < 0.0) fail_field(path + ".p_mw", "demand must be non-negative");
      cse.loads.push_back(ld);
    }
  }

  const ordered_json& jsgs = req_array(doc, "$", "sgs");
  for (size_t i = 0; i < jsgs.size(); ++i) {
    const std::string path = idx("sgs", i);
    SgSpec sg;
    sg.id = req_str(jsgs[i], path, "id");
    claim_id(sg.id, path + ".id");
    sg.bus = req_str(jsgs[i], path, "bus");
    check_bus_ref(sg.bus, path + ".bus");
    sg.x = opt_num(jsgs[i], path, "x", 0.0);
    if (sg.x < 0.0) fail_field(path + ".x", "reactance must be non-negative");
    sg.M = req_num(jsgs[i], path, "M");
    if (!(sg.M > 0.0)) fail_field(path + ".M", "inertia must be positive");
    sg.D = req_num(jsgs[i], path, "D");
    if (sg.D < 0.0) fail_field(path + ".D", "damping must be non-negative");
    cse.sgs.push_back(sg);
  }
  if (cse.sgs.empty()) throw ValidationError("case must contain at least one SG");

  const ordered_json& jgfms = req_array(doc, "$", "gfms");
  for (size_t i = 0; i < jgfms.size(); ++i) {
    const std::string path = idx("gfms", i);
    GfmSpec g;
    g.id = req_str(jgfms[i], path, "id");
    claim_id(g.id, path + ".id");
    g.bus = req_str(jgfms[i], path, "bus");
    check_bus_ref(g.bus, path + ".bus");
    g.x = opt_num(jgfms[i], path, "x", 0.0);
    if (g.x < 0.0) fail_field(path + ".x", "reactance must be non-negative");
    g.S_mva = req_num(jgfms[i], path, "S_mva");
    if (!(g.S_mva > 0.0)) fail_field(path + ".S_mva", "capacity must be positive");
    g.mp_hat = req_num(jgfms[i], path, "mp_hat");
    if (!(g.mp_hat > 0.0)) fail_field(path + ".mp_hat", "droop setting must be positive");
    g.mq_hat = opt_num(jgfms[i], path, "mq_hat", 0.0);
    g.tau = req_num(jgfms[i], path, "tau");
    if (!(g.tau > 0.0)) fail_field(path + ".tau", "filter time constant must be positive");
    cse.gfms.push_back(g);
  }
  if (cse.gfms.empty()) throw ValidationError("case must contain at least one GFM");

  // Devices with x = 0 keep their terminal bus as the internal node; that bus
  // can host at most one such device.
  std::set<std::string> direct_buses;
  auto claim_direct = [&direct_buses](const std::string& bus, const std::string& dev) {
    if (!direct_buses.insert(bus).second)
      throw ValidationError("device '" + dev + "': bus '" + bus +
                            "' already hosts another zero-reactance device");
  };
  for (const auto& sg : cse.sgs)
    if (sg.x == 0.0) claim_direct(sg.bus, sg.id);
  for (const auto& g : cse.gfms)
    if (g.x == 0.0) claim_direct(g.bus, g.id);

  const ordered_json& jop = req_member(doc, "$", "operating_point");
  if (!jop.is_object()) fail_field("operating_point", "expected an object");
  for (auto it = jop.begin(); it != jop.end(); ++it) {
    const std::string path = "operating_point." + it.key();
    if (!ids.count(it.key()) || bus_ids.count(it.key()))
      throw ValidationError("dangling reference '" + it.key() +
                            "' at operating_point: no such device");
    DeviceOp op;
    op.vm = req_num(*it, path, "vm");
    if (!(op.vm > 0.0)) fail_field(path + ".vm", "EMF magnitude must be positive");
    op.angle = req_num(*it, path, "angle");
    cse.operating_point[it.key()] = op;
  }
  auto require_op = [&cse](const std::string& dev) {
    if (!cse.operating_point.count(dev))
      throw ValidationError("missing operating point for device '" + dev + "'");
  };
  for (const auto& sg : cse.sgs) require_op(sg.id);
  for (const auto& g : cse.gfms) require_op(g.id);

  return cse;
}

NetworkCase load_case_file(const std::string& path) {
  return load_case_text(io::read_file(path));
}

std::string serialize_case(const NetworkCase& cse) {
  ordered_json doc;
  doc["base_mva"] = cse.base_mva;
  doc["omega0_rad_s"] = cse.omega0_rad_s;
  doc["buses"] = ordered_json::array();
  for (const auto& b : cse.buses)
    doc["buses"].push_back(
        {{"id", b.id}, {"vm", b.vm}, {"angle", b.angle}, {"shunt_b", b.shunt_b}});
  doc["branches"] = ordered_json::array();
  for (const auto& br : cse.branches)
    doc["branches"].push_back({{"from", br.from}, {"to", br.to}, {"b", br.b}});
  doc["loads"] = ordered_json::array();
  for (const auto& ld : cse.loads)
    doc["loads"].push_back({{"bus", ld.bus}, {"b", ld.b}, {"p_mw", ld.p_mw}});
  doc["sgs"] = ordered_json::array();
  for (const auto& sg : cse.sgs)
    doc["sgs"].push_back({{"id", sg.id},
                          {"bus", sg.bus},
                          {"x", sg.x},
                          {"M", sg.M},
                          {"D", sg.D}});
  doc["gfms"] = ordered_json::array();
  for (const auto& g : cse.gfms)
    doc["gfms"].push_back({{"id", g.id},
                           {"bus", g.bus},
                           {"x", g.x},
                           {"S_mva", g.S_mva},
                           {"mp_hat", g.mp_hat},
                           {"mq_hat", g.mq_hat},
                           {"tau", g.tau}});
  doc["operating_point"] = ordered_json::object();
  for (const auto& [id, op] : cse.operating_point)
    doc["operating_point"][id] = {{"vm", op.vm}, {"angle", op.angle}};
  return doc.dump(2) + "\n";
}

// ---- kron_reduce ----------------------------------------------------------------

ReducedNetwork kron_reduce(const NetworkCase& cse) {
  const int n_g = static_cast<int>(cse.sgs.size());
  const int n_i = static_cast<int>(cse.gfms.size());
  const int n_int = n_g + n_i;

  // Node table: internal nodes first (SGs, then GFMs), then the physical buses
  // that were not absorbed by a zero-reactance device.
  std::vector<std::string> labels;
  std::map<std::string, int> bus_node;  // bus id -> node index
  labels.reserve(n_int + cse.buses.size());
  for (const auto& sg : cse.sgs) labels.push_back(sg.id);
  for (const auto& g : cse.gfms) labels.push_back(g.id);
  for (int k = 0; k < n_g; ++k)
    if (cse.sgs[k].x == 0.0) bus_node[cse.sgs[k].bus] = k;
  for (int j = 0; j < n_i; ++j)
    if (cse.gfms[j].x == 0.0) bus_node[cse.gfms[j].bus] = n_g + j;
  for (const auto& b : cse.buses) {
    if (!bus_node.count(b.id)) {
      bus_node[b.id] = static_cast<int>(labels.size());
      labels.push_back(b.id);
    }
  }
  const int n = static_cast<int>(labels.size());

  Mat B = Mat::Zero(n, n);
  auto add_branch = [&B](int a, int b, double s) {
    B(a, a) += s;
    B(b, b) += s;
    B(a, b) -= s;
    B(b, a) -= s;
  };
  for (int k = 0; k < n_g; ++k)
    if (cse.sgs[k].x > 0.0) add_branch(k, bus_node.at(cse.sgs[k].bus), 1.0 / cse.sgs[k].x);
  for (int j = 0; j < n_i; ++j)
    if (cse.gfms[j].x > 0.0)
      add_branch(n_g + j, bus_node.at(cse.gfms[j].bus), 1.0 / cse.gfms[j].x);
  for (const auto& br : cse.branches)
    add_branch(bus_node.at(br.from), bus_node.at(br.to), br.b);
  for (const auto& b : cse.buses) B(bus_node.at(b.id), bus_node.at(b.id)) += b.shunt_b;
  for (const auto& ld : cse.loads) B(bus_node.at(ld.bus), bus_node.at(ld.bus)) += ld.b;

  ReducedNetwork red;
  red.n_g = n_g;
  red.n_i = n_i;
  red.node_ids.assign(labels.begin(), labels.begin() + n_int);

  const int n_el = n - n_int;
  if (n_el == 0) {
    red.B_red = B;
    red.interior_cond = 1.0;
  } else {
    Mat Bkk = B.topLeftCorner(n_int, n_int);
    Mat Bkl = B.topRightCorner(n_int, n_el);
    Mat Blk = B.bottomLeftCorner(n_el, n_int);
    Mat Bll = B.bottomRightCorner(n_el, n_el);

    // B_ll is symmetric, so its singular values are |eigenvalues|.
    Eigen::SelfAdjointEigenSolver<Mat> es(Bll);
    const Vec sv = es.eigenvalues().cwiseAbs();
    const double smin = sv.minCoeff();
    const double smax = sv.maxCoeff();
    if (smin <= 1e-12 * std::max(1.0, smax))
      throw NumericalError("singular interior block in Kron reduction (smallest singular value " +
                           io::fmt(smin) + ")");
    red.interior_cond = smax / smin;
    red.B_red = Bkk - Bkl * Bll.fullPivLu().solve(Blk);
    red.B_red = 0.5 * (red.B_red + red.B_red.transpose().eval());  // enforce exact symmetry
  }

  red.E.resize(n_int);
  red.delta0.resize(n_int);
  for (int k = 0; k < n_int; ++k) {
    const DeviceOp& op = cse.operating_point.at(red.node_ids[k]);
    red.E(k) = op.vm;
    red.delta0(k) = op.angle;
  }
  return red;
}

// ---- build_jacobians --------------------------------------------------------------

JacobianSet build_jacobians(const ReducedNetwork& red) {
  const int n = red.n_g + red.n_i;
  const Mat& Br = red.B_red;

  JacobianSet jac;
  jac.n_g = red.n_g;
  jac.n_i = red.n_i;
  jac.node_ids = red.node_ids;

  // Effective couplings and grounding of the reduced network.
  Mat bhat = -Br;
  bhat.diagonal().setZero();
  Vec s = Br.rowwise().sum();

  // Stability wedge: every active coupling (including the grounding leg to the
  // angle reference) must see an angle difference strictly inside (-pi/2, pi/2).
  constexpr double kCouplingTol = 1e-12;
  for (int k = 0; k < n; ++k) {
    for (int j = k + 1; j < n; ++j) {
      if (std::abs(bhat(k, j)) <= kCouplingTol) continue;
      if (std::abs(red.delta0(k) - red.delta0(j)) >= kPi / 2.0)
        throw ValidationError("operating point outside stability wedge on branch " +
                              red.node_ids[k] + ":" + red.node_ids[j]);
    }
    if (std::abs(s(k)) > kCouplingTol && std::abs(red.delta0(k)) >= kPi / 2.0)
      throw ValidationError("operating point outside stability wedge on branch " +
                            red.node_ids[k] + ":(ref)");
  }

  Mat K = Mat::Zero(n, n);
  jac.shunt_diag.resize(n);
  for (int k = 0; k < n; ++k) {
    double diag = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == k) continue;
      const double t = red.E(k) * red.E(j) * bhat(k, j) *
                       std::cos(red.delta0(k) - red.delta0(j));
      K(k, j) = -t;
      diag += t;
    }
    jac.shunt_diag(k) = red.E(k) * s(k) * std::cos(red.delta0(k));
    K(k, k) = diag + jac.shunt_diag(k);
  }

  jac.K = K;
  jac.Kgg = K.topLeftCorner(red.n_g, red.n_g);
  jac.Kgi = K.topRightCorner(red.n_g, red.n_i);
  jac.Kig = K.bottomLeftCorner(red.n_i, red.n_g);
  jac.Kii = K.bottomRightCorner(red.n_i, red.n_i);

  // Diagonal / Laplacian split per block: in-block couplings form the
  // Laplacian part, so the diagonal part equals the block row sum (grounding
  // plus folded cross-block couplings).
  auto split = [](const Mat& blk, Vec& lap, Vec& diag) {
    const int m = static_cast<int>(blk.rows());
    lap.resize(m);
    diag.resize(m);
    for (int k = 0; k < m; ++k) {
      double off = 0.0;
      for (int j = 0; j < m; ++j)
        if (j != k) off += blk(k, j);
      lap(k) = -off;
      diag(k) = blk(k, k) - lap(k);
    }
  };
  split(jac.Kgg, jac.lap_gg, jac.diag_gg);
  split(jac.Kii, jac.lap_ii, jac.diag_ii);

  jac.gamma_l = jac.diag_ii.minCoeff();
  jac.gamma_u = (jac.diag_ii + 2.0 * jac.lap_ii).maxCoeff();
  return jac;
}

std::pair<double, double> gamma_bounds(const JacobianSet& jac) {
  if (jac.gamma_l <= 0.0)
    throw ValidationError("weak-grid violation: gamma_l = " + io::fmt(jac.gamma_l) +
                          " (GFM grid-strength lower bound must be positive)");
  // Re-verify the sandwich gamma_l*I <= K_ii <= gamma_u*I on the actual spectrum.
  Eigen::SelfAdjointEigenSolver<Mat> es(jac.Kii);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  const double slack = 1e-9 * std::max(1.0, std::abs(lmax));
  if (lmin < jac.gamma_l - slack || lmax > jac.gamma_u + slack)
    throw NumericalError("gamma sandwich violated: spectrum [" + io::fmt(lmin) + ", " +
                         io::fmt(lmax) + "] vs bounds [" + io::fmt(jac.gamma_l) + ", " +
                         io::fmt(jac.gamma_u) + "]");
  return {jac.gamma_l, jac.gamma_u};
}

// ---- validate_assumptions -----------------------------------------------------------

AssumptionReport validate_assumptions(const JacobianSet& jac) {
  AssumptionReport rep;

  // A1: the SG stiffness seen through the inverter layer must be PD.
  Eigen::FullPivLU<Mat> lu(jac.Kii);
  if (lu.isInvertible()) {
    Mat schur = jac.Kgg - jac.Kgi * lu.solve(jac.Kig);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (schur + schur.transpose().eval()));
    rep.schur_lambda_min = es.eigenvalues().minCoeff();
  } else {
    rep.schur_lambda_min = -std::numeric_limits<double>::infinity();
  }
  rep.positive_definite = rep.schur_lambda_min > 0.0;

  // A2: the SG/GFM coupling blocks must have full row rank (no SG decoupled
  // from the inverter fleet, no direction of the fleet invisible to the SGs).
  auto smin_psd = [](const Mat& G) {
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    return std::max(0.0, es.eigenvalues().minCoeff());
  };
  const Mat G1 = jac.Kgi * jac.Kgi.transpose();
  const Mat G2 = jac.Kig.transpose() * jac.Kig;
  rep.smin_kgi_kgit = smin_psd(G1);
  rep.smin_kigt_kig = smin_psd(G2);
  const double scale = std::max({1.0, G1.cwiseAbs().maxCoeff(), G2.cwiseAbs().maxCoeff()});
  rep.couplings_full_rank =
      rep.smin_kgi_kgit > 1e-12 * scale && rep.smin_kigt_kig > 1e-12 * scale;

  rep.more_gfm_than_sg = jac.n_i > jac.n_g;
  rep.pass = rep.positive_definite && rep.couplings_full_rank && rep.more_gfm_than_sg;
  return rep;
}

// ---- injections ----------------------------------------------------------------------

Vec injections(const ReducedNetwork& red, const Vec& delta) {
  const int n = red.n_g + red.n_i;
  Mat bhat = -red.B_red;
  bhat.diagonal().setZero();
  const Vec s = red.B_red.rowwise().sum();
  Vec P = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != k)
        acc += red.E(k) * red.E(j) * bhat(k, j) * std::sin(delta(k) - delta(j));
    P(k) = acc + red.E(k) * s(k) * std::sin(delta(k));
  }
  return P;
}

}  // namespace gridform
