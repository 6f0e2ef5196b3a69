#pragma once

#include "gridform/devices.hpp"
#include "gridform/modal.hpp"
#include "gridform/netmodel.hpp"
#include "gridform/types.hpp"

#include <string>
#include <vector>

// Parameter sweeps over droop setting and fleet capacity.
//
// The network (and hence the Jacobian set) is independent of both sweep axes;
// only the effective droop m_p = mp_hat / (S/base) moves.  Each grid point is
// an independent eigensolve, scheduled across a worker pool; mode identity is
// then stitched serially by greedy eigenvector-overlap matching, so results
// are byte-identical regardless of worker count.  Mode ids and classes are
// frozen at the first grid point: a tracking break splits the locus and is
// reported as a warning, never silently reindexed.

namespace gridform {

struct LocusPoint {
  double param = 0.0;
  Cplx lambda;
  double freq_hz = 0.0;
  double damping = 0.0;   // fraction
  bool tracked = false;   // false: identity lost at this grid point
  double overlap = 0.0;   // |u_prev^H u| against the previous tracked point
};

struct MonotoneSegment {
  int begin = 0, end = 0;  // inclusive point indices
  std::string direction;   // "nondecreasing" | "nonincreasing" | "flat"
};

struct ModeLocus {
  int mode_id = 0;     // frozen from the first grid point
  std::string klass;   // frozen from the first grid point
  std::vector<LocusPoint> points;        // one per axis value
  std::vector<int> breaks;               // indices where continuity failed
  std::vector<MonotoneSegment> segments; // damping monotonicity annotations
};

struct SweepResult {
  std::string param_name;      // "droop" | "size"
  std::vector<double> values;  // strictly monotone axis
  std::vector<ModeLocus> loci;
  std::vector<std::string> warnings;
};

// Droop sweep: every GFM's setting is set to each axis value (fractions, e.g.
// 0.10 ... 0.02).  Requires >= 3 strictly monotone points and equal effective
// droop across the fleet at every point.
SweepResult sweep_droop(const NetworkCase& cse, const std::vector<double>& mp_hat_values);

// Capacity sweep at fixed settings: the axis is total fleet capacity in MVA;
// each GFM's rating is scaled proportionally.  A single point is a valid
// snapshot; multi-point axes must be strictly monotone.
SweepResult sweep_size(const NetworkCase& cse, const std::vector<double>& s_total_mva);

struct ModeReversal {
  int mode_id = 0;
  std::string klass;
  bool interior = false;      // discrete max away from both endpoints
  double param_at_max = 0.0;  // quadratic refinement around the discrete max
  double zeta_max = 0.0;      // fraction, at the refined vertex
  std::string note;           // "no interior reversal" when applicable
};

// Locates the damping maximum of each locus (>= 5 grid points required) and
// refines interior maxima with a 3-point quadratic fit.
std::vector<ModeReversal> detect_reversal(const SweepResult& sr);

// CSV table: param_name, param_value, mode_id, re, im, freq_hz, damping_pct.
// Untracked points are omitted rather than interpolated.
std::string sweep_csv(const SweepResult& sr);

// JSON body of the reversal report, keyed by mode_id, including the
// monotonic-segment annotations of each locus.
std::string reversal_json(const SweepResult& sr, const std::vector<ModeReversal>& revs);

}  // namespace gridform
