#pragma once

#include "gridform/netmodel.hpp"
#include "gridform/types.hpp"

// Device parameters and the droop/capacity conversion.
//
// GFM droop settings are specified per unit of the device's own rating; the
// swing-level model wants the droop on the system base.  The two are related
// through the capacity share m_p = mp_hat / (S / base), so doubling a fleet's
// capacity at a fixed setting is exactly equivalent to halving the setting at
// fixed capacity.  The reduced model assumes one common effective droop, so
// park construction rejects fleets whose per-unit settings disagree on the
// system base.

namespace gridform {

struct DevicePark {
  Vec M, D;                        // per-SG inertia / damping
  Vec S_mva, mp_hat, mq_hat, tau;  // per-GFM rating, droop settings, filter
  double base_mva = 100.0;
  double omega0_rad_s = 0.0;
  double mp = 0.0;  // common effective droop on the system base
};

// Effective droop on the system base for a setting mp_hat on rating S_mva.
double droop_from_setting(double mp_hat, double S_mva, double base_mva);

// Inverse map; round-trips with droop_from_setting to machine precision.
double setting_from_droop(double mp, double S_mva, double base_mva);

// Collects device parameters from a parsed case and enforces the common
// effective droop (ValidationError naming the first disagreeing GFM).
DevicePark build_park(const NetworkCase& cse);

struct ParkExtremes {
  double M_u = 0.0, M_l = 0.0;  // max / min SG inertia
  double D_u = 0.0, D_l = 0.0;  // max / min SG damping
};

ParkExtremes park_extremes(const DevicePark& park);

struct TimescaleReport {
  double margin = 0.0;  // min_j (1/tau_j) / max_k (D_k / M_k)
  bool ok = false;      // margin >= 10: filters are fast against swing dynamics
};

// Quasi-steady-state check: the GFM measurement filters must act well above
// the fastest SG damping rate for the reduced model to be trustworthy.
TimescaleReport timescale_check(const DevicePark& park);

}  // namespace gridform
