#include "gridform/devices.hpp"

#include "gridform/io.hpp"

#include <cmath>

namespace gridform {

double droop_from_setting(double mp_hat, double S_mva, double base_mva) {
  if (!(S_mva > 0.0) || !(base_mva > 0.0))
    throw ValidationError("droop conversion requires positive ratings (S = " +
                          io::fmt(S_mva) + ", base = " + io::fmt(base_mva) + ")");
  return mp_hat / (S_mva / base_mva);
}

double setting_from_droop(double mp, double S_mva, double base_mva) {
  if (!(S_mva > 0.0) || !(base_mva > 0.0))
    throw ValidationError("droop conversion requires positive ratings (S = " +
                          io::fmt(S_mva) + ", base = " + io::fmt(base_mva) + ")");
  return mp * (S_mva / base_mva);
}

DevicePark build_park(const NetworkCase& cse) {
  DevicePark park;
  park.base_mva = cse.base_mva;
  park.omega0_rad_s = cse.omega0_rad_s;

  const int n_g = static_cast<int>(cse.sgs.size());
  park.M.resize(n_g);
  park.D.resize(n_g);
  for (int k = 0; k < n_g; ++k) {
    park.M(k) = cse.sgs[k].M;
    park.D(k) = cse.sgs[k].D;
  }

  const int n_i = static_cast<int>(cse.gfms.size());
  park.S_mva.resize(n_i);
  park.mp_hat.resize(n_i);
  park.mq_hat.resize(n_i);
  park.tau.resize(n_i);
  for (int j = 0; j < n_i; ++j) {
    park.S_mva(j) = cse.gfms[j].S_mva;
    park.mp_hat(j) = cse.gfms[j].mp_hat;
    park.mq_hat(j) = cse.gfms[j].mq_hat;
    park.tau(j) = cse.gfms[j].tau;
  }

  // The model carries one effective droop for the whole fleet.
  park.mp = droop_from_setting(park.mp_hat(0), park.S_mva(0), park.base_mva);
  for (int j = 1; j < n_i; ++j) {
    const double mpj = droop_from_setting(park.mp_hat(j), park.S_mva(j), park.base_mva);
    if (std::abs(mpj - park.mp) > 1e-9 * std::max(1.0, std::abs(park.mp)))
      throw ValidationError("GFM '" + cse.gfms[j].id +
                            "' breaks the common effective droop: " + io::fmt(mpj) +
                            " vs " + io::fmt(park.mp) + " on the system base");
  }
  return park;
}

ParkExtremes park_extremes(const DevicePark& park) {
  ParkExtremes ex;
  ex.M_u = park.M.maxCoeff();
  ex.M_l = park.M.minCoeff();
  ex.D_u = park.D.maxCoeff();
  ex.D_l = park.D.minCoeff();
  return ex;
}

TimescaleReport timescale_check(const DevicePark& park) {
  TimescaleReport rep;
  const double fastest_filter = (1.0 / park.tau.array()).minCoeff();
  const double fastest_swing = (park.D.array() / park.M.array()).maxCoeff();
  rep.margin = fastest_filter / fastest_swing;
  rep.ok = rep.margin >= 10.0;
  return rep;
}

}  // namespace gridform
