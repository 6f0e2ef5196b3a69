#pragma once

#include "gridform/types.hpp"

#include <map>
#include <string>
#include <vector>

// Network ingestion and reduction.
//
// The model of record is a lossless classical network: every synchronous
// generator (SG) and grid-forming inverter (GFM) holds a constant internal
// EMF E∠δ behind its coupling reactance; loads are constant-susceptance
// shunts.  All passive buses are Kron-eliminated, leaving a symmetric
// susceptance matrix over the device internal nodes (SGs first, then GFMs).
// Grounding through the eliminated network shows up as row sums of the
// reduced matrix and is modeled as coupling to a unit-voltage reference bus
// pinned at angle zero.

namespace gridform {

// ---- raw case description ----------------------------------------------------

struct BusSpec {
  std::string id;
  double vm = 1.0;       // terminal voltage magnitude, p.u. (descriptive)
  double angle = 0.0;    // terminal angle, rad (descriptive)
  double shunt_b = 0.0;  // fixed shunt susceptance, p.u.
};

struct BranchSpec {
  std::string from, to;
  double b = 0.0;  // series susceptance, p.u. (lossless line)
};

struct LoadSpec {
  std::string bus;
  double b = 0.0;     // constant-impedance equivalent susceptance, p.u.
  double p_mw = 0.0;  // declared demand; used only for capacity sizing semantics
};

struct SgSpec {
  std::string id, bus;
  double x = 0.0;  // internal (transient) reactance, p.u.; 0 = EMF directly at bus
  double M = 0.0;  // inertia constant 2H/omega0, s^2 * p.u.
  double D = 0.0;  // damping, s * p.u.
};

struct GfmSpec {
  std::string id, bus;
  double x = 0.0;       // coupling reactance to the POI, p.u.
  double S_mva = 0.0;   // unit capacity
  double mp_hat = 0.0;  // active-power droop setting, fraction (0.05 = 5 %)
  double mq_hat = 0.0;  // reactive droop setting; stored, not used by the model
  double tau = 0.0;     // measurement filter time constant, s
};

struct DeviceOp {
  double vm = 1.0;    // internal EMF magnitude, p.u.
  double angle = 0.0; // internal angle at the operating point, rad
};

struct NetworkCase {
  double base_mva = 100.0;
  double omega0_rad_s = 2.0 * 3.14159265358979323846 * 60.0;
  std::vector<BusSpec> buses;
  std::vector<BranchSpec> branches;
  std::vector<LoadSpec> loads;
  std::vector<SgSpec> sgs;
  std::vector<GfmSpec> gfms;
  std::map<std::string, DeviceOp> operating_point;  // keyed by device id
  std::string raw_text;  // original bytes; hashed into artifact headers
};

// Parses and validates a case document (JSON; schema in docs/case-schema.json).
// Throws ValidationError naming the offending entity on duplicate ids,
// dangling bus references, missing operating points, or non-physical values.
NetworkCase load_case_text(const std::string& text);

// Convenience wrapper: reads the file (error names the path) and parses.
NetworkCase load_case_file(const std::string& path);

// Canonical serialization (schema field order, 2-space indent, shortest
// round-trip numbers).  Fixpoint: serialize(parse(serialize(c))) equals
// serialize(c) byte for byte.
std::string serialize_case(const NetworkCase& cse);

// ---- reduced network -----------------------------------------------------------

struct ReducedNetwork {
  Mat B_red;                         // symmetric susceptance over internal nodes
  Vec E;                             // internal EMF magnitudes
  Vec delta0;                        // operating-point internal angles, rad
  std::vector<std::string> node_ids; // SGs first, then GFMs
  int n_g = 0, n_i = 0;
  double interior_cond = 0.0;        // condition number of the eliminated block
};

// Kron reduction: B_red = B_kk - B_kl * B_ll^-1 * B_lk over the device internal
// nodes.  A device with x = 0 keeps its terminal bus as the internal node (the
// bus is not eliminated); two x = 0 devices may not share a bus.  Throws
// NumericalError carrying the smallest singular value when the eliminated
// block is singular.
ReducedNetwork kron_reduce(const NetworkCase& cse);

// ---- linearized network --------------------------------------------------------

struct JacobianSet {
  Mat K;               // full (n_g+n_i) Jacobian of the injection map
  Mat Kgg, Kgi, Kig, Kii;
  Vec shunt_diag;      // grounding terms E_k * s_k * cos(delta0_k), per node
  Vec lap_gg, diag_gg; // Laplacian / diagonal split of K_gg (see below)
  Vec lap_ii, diag_ii; // same split for K_ii
  double gamma_l = 0.0, gamma_u = 0.0;  // grid-strength bounds from the split
  int n_g = 0, n_i = 0;
  std::vector<std::string> node_ids;
};

// Builds the injection Jacobian at the operating point:
//   K[k][j] = -E_k E_j b_kj cos(d0_k - d0_j)            (k != j)
//   K[k][k] = sum_{j!=k} E_k E_j b_kj cos(d0_k - d0_j) + E_k s_k cos(d0_k)
// with b_kj = -B_red[k][j] and s_k = row sum of B_red.  The diagonal split per
// block assigns couplings *within* the block to the Laplacian part and
// everything else (cross-block couplings + grounding) to the diagonal part, so
// each block row of the full K sums to its diagonal-part entry.
// Throws ValidationError naming the coupled pair ("g1:i2", or "i1:(ref)" for a
// grounding term) when an angle difference leaves the (-pi/2, pi/2) wedge.
JacobianSet build_jacobians(const ReducedNetwork& red);

// Returns (gamma_l, gamma_u) and re-verifies the eigenvalue sandwich
// gamma_l*I <= K_ii <= gamma_u*I.  Throws ValidationError ("weak-grid
// violation") when gamma_l <= 0.
std::pair<double, double> gamma_bounds(const JacobianSet& jac);

// ---- model assumptions ----------------------------------------------------------

struct AssumptionReport {
  double schur_lambda_min = 0.0;  // lambda_min(K_gg - K_gi K_ii^-1 K_ig)
  bool positive_definite = false; // assumption: reduced SG stiffness PD
  double smin_kgi_kgit = 0.0;     // smallest singular value of K_gi K_gi^T
  double smin_kigt_kig = 0.0;     // smallest singular value of K_ig^T K_ig
  bool couplings_full_rank = false;
  bool more_gfm_than_sg = false;  // n_i > n_g
  bool pass = false;              // conjunction of the three checks
};

// Evaluates the network-side model assumptions.  Violations are reported, not
// thrown; downstream operations decide what is fatal.
AssumptionReport validate_assumptions(const JacobianSet& jac);

// ---- nonlinear injections --------------------------------------------------------

// Active-power injections of the reduced lossless network at angles `delta`:
//   P_k = sum_{j!=k} E_k E_j b_kj sin(delta_k - delta_j) + E_k s_k sin(delta_k)
// This is exactly the map whose Jacobian at delta0 is build_jacobians' K, and
// it drives both the finite-difference oracle and the ringdown integrator.
Vec injections(const ReducedNetwork& red, const Vec& delta);

}  // namespace gridform
