#pragma once

#include "gridform/netmodel.hpp"
#include "gridform/types.hpp"

#include <string>
#include <vector>

// Nonlinear ringdown simulation and single-mode estimation from trajectories.
//
// The simulator integrates the same quasi-steady reduced model the linear
// analysis is built from: swing dynamics for the SGs and algebraic droop
// response for the GFM angles, with full sine nonlinearities in the network
// injections.  Set-points are taken from the case operating point, so the
// stored equilibrium is exact by construction and a zero perturbation stays
// put to machine precision.  Integration is classical fixed-step RK4 —
// deterministic by design — and stops early (with an event-log entry) if the
// trajectory leaves the stability wedge, where the small-signal story is void.
//
// estimate_mode recovers (frequency, damping ratio) of the dominant
// oscillation in one channel: windowed fine-grid spectrum for the frequency,
// then log-decrement over the extrema of the band-filtered signal for the
// decay.  Both steps carry uncertainty estimates.

namespace gridform {

struct Trajectory {
  Vec t;                            // sample instants, t(0) = 0
  Mat states;                       // one row per instant, one column per label
  std::vector<std::string> labels;  // delta_<sg>..., omega_<sg>..., delta_<gfm>...
  std::vector<std::string> events;  // truncation and other notable happenings
  bool truncated = false;           // left the stability wedge before horizon
  Vec delta_star;                   // equilibrium angles [SGs, GFMs]
  Vec Pm;                           // SG mechanical inputs at equilibrium
  Vec Pset;                         // GFM droop set-points at equilibrium
};

// Integrates the nonlinear reduced model from the case equilibrium plus
// `x0_offset` (state deviation, ordered like the labels).  Requires
// dt <= 1/(20 f_max) against the linearized spectrum; throws ValidationError
// otherwise or when the offset has the wrong dimension.
Trajectory simulate(const NetworkCase& cse, const Vec& x0_offset, double horizon,
                    double dt);

// Reference twin: identical grid and integrator, but on the linearized
// dynamics.  Comparing against this isolates the nonlinearity error O(eps^2)
// from RK4 discretization error, which both trajectories share.
Trajectory simulate_linear(const NetworkCase& cse, const Vec& x0_offset,
                           double horizon, double dt);

struct ModeEstimate {
  double f_hz = 0.0;
  double f_unc = 0.0;      // spectral grid spacing after refinement
  double zeta = 0.0;       // fraction
  double zeta_unc = 0.0;   // propagated from the log-decrement fit
  double sigma = 0.0;      // fitted decay rate, 1/s
  int n_extrema = 0;       // extrema used by the decrement fit
};

// Estimates the dominant mode in `channel` (a state label).  Throws
// NumericalError("non-oscillatory ...") when the channel has fewer than three
// sign changes, no interior spectral peak, or too few usable extrema.
ModeEstimate estimate_mode(const Trajectory& traj, const std::string& channel);

// CSV table: t plus one column per state label.
std::string trajectory_csv(const Trajectory& traj);

}  // namespace gridform
