#include "gridform/ringdown.hpp"

#include "gridform/devices.hpp"
#include "gridform/io.hpp"
#include "gridform/modal.hpp"
#include "gridform/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace gridform {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SimSetup {
  ReducedNetwork red;
  JacobianSet jac;
  DevicePark park;
  Vec Pm, Pset;                   // equilibrium injections per block
  std::vector<std::pair<int, int>> pairs;  // coupled node pairs (wedge watch)
  std::vector<int> grounded;               // nodes with a grounding leg
  int ng = 0, ni = 0;
  Mat A;  // linearization at the equilibrium
};

SimSetup prepare(const NetworkCase& cse, double dt) {
  SimSetup s;
  s.red = kron_reduce(cse);
  s.jac = build_jacobians(s.red);
  s.park = build_park(cse);
  s.ng = s.red.n_g;
  s.ni = s.red.n_i;

  const Vec P0 = injections(s.red, s.red.delta0);
  s.Pm = P0.head(s.ng);
  s.Pset = P0.tail(s.ni);

  Mat bhat = -s.red.B_red;
  bhat.diagonal().setZero();
  const Vec sh = s.red.B_red.rowwise().sum();
  const int n = s.ng + s.ni;
  for (int k = 0; k < n; ++k) {
    for (int j = k + 1; j < n; ++j)
      if (std::abs(bhat(k, j)) > 1e-12) s.pairs.emplace_back(k, j);
    if (std::abs(sh(k)) > 1e-12) s.grounded.push_back(k);
  }

  StateMatrix sm = assemble_state_matrix(s.jac, s.park);
  s.A = sm.A;
  double f_max = 0.0;
  for (const Mode& m : eigen_modes(sm)) f_max = std::max(f_max, m.freq_hz);
  if (f_max > 0.0 && dt > 1.0 / (20.0 * f_max))
    throw ValidationError("dt = " + io::fmt(dt) + " s is too coarse: need dt <= " +
                          io::fmt(1.0 / (20.0 * f_max)) +
                          " s (1/20 of the fastest linear mode at " + io::fmt(f_max) +
                          " Hz)");
  return s;
}

// Index of the first wedge violation in delta, or -1.  Returns a description
// through `what`.
int wedge_violation(const SimSetup& s, const Vec& delta, std::string* what) {
  for (const auto& [k, j] : s.pairs) {
    if (std::abs(delta(k) - delta(j)) >= kPi / 2.0) {
      *what = s.jac.node_ids[static_cast<size_t>(k)] + ":" +
              s.jac.node_ids[static_cast<size_t>(j)];
      return k;
    }
  }
  for (int k : s.grounded) {
    if (std::abs(delta(k)) >= kPi / 2.0) {
      *what = s.jac.node_ids[static_cast<size_t>(k)] + ":(ref)";
      return k;
    }
  }
  return -1;
}

template <typename Rhs>
Trajectory integrate(const SimSetup& s, const Vec& x0_offset, double horizon,
                     double dt, Rhs&& rhs, bool watch_wedge) {
  const int ng = s.ng, ni = s.ni;
  const int dim = 2 * ng + ni;
  if (x0_offset.size() != dim)
    throw ValidationError("perturbation has dimension " +
                          std::to_string(x0_offset.size()) + "; the model has " +
                          std::to_string(dim) + " states");
  if (!(dt > 0.0) || !(horizon > 0.0))
    throw ValidationError("horizon and dt must be positive");

  Vec xeq(dim);
  xeq.head(ng) = s.red.delta0.head(ng);
  xeq.segment(ng, ng).setZero();
  xeq.tail(ni) = s.red.delta0.tail(ni);

  // Equilibrium consistency: the set-points are the injections at delta*, so
  // the drift must vanish there.
  if (rhs(xeq).template lpNorm<Eigen::Infinity>() > 1e-9)
    throw ValidationError("case equilibrium is inconsistent: nonzero drift at the "
                          "declared operating point");

  const int steps = static_cast<int>(std::llround(horizon / dt));
  Trajectory traj;
  traj.labels.reserve(static_cast<size_t>(dim));
  for (int k = 0; k < ng; ++k) traj.labels.push_back("delta_" + s.jac.node_ids[k]);
  for (int k = 0; k < ng; ++k) traj.labels.push_back("omega_" + s.jac.node_ids[k]);
  for (int j = 0; j < ni; ++j)
    traj.labels.push_back("delta_" + s.jac.node_ids[ng + j]);
  traj.delta_star = s.red.delta0;
  traj.Pm = s.Pm;
  traj.Pset = s.Pset;
  traj.t.resize(steps + 1);
  traj.states.resize(steps + 1, dim);

  Vec x = xeq + x0_offset;
  traj.t(0) = 0.0;
  traj.states.row(0) = x.transpose();

  int written = 1;
  for (int i = 1; i <= steps; ++i) {
    const Vec k1 = rhs(x);
    const Vec k2 = rhs(x + (0.5 * dt) * k1);
    const Vec k3 = rhs(x + (0.5 * dt) * k2);
    const Vec k4 = rhs(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    traj.t(i) = i * dt;
    traj.states.row(i) = x.transpose();
    ++written;

    if (watch_wedge) {
      Vec delta(ng + ni);
      delta.head(ng) = x.head(ng);
      delta.tail(ni) = x.tail(ni);
      std::string what;
      if (wedge_violation(s, delta, &what) >= 0) {
        traj.truncated = true;
        traj.events.push_back("nonlinear regime: stability wedge exceeded on " +
                              what + " at t = " + io::fmt(i * dt) +
                              " s; trajectory truncated");
        break;
      }
    }
  }
  traj.t.conservativeResize(written);
  traj.states.conservativeResize(written, dim);
  return traj;
}

}  // namespace

Trajectory simulate(const NetworkCase& cse, const Vec& x0_offset, double horizon,
                    double dt) {
  SimSetup s = prepare(cse, dt);
  const int ng = s.ng, ni = s.ni;

  auto rhs = [&s, ng, ni](const Vec& x) {
    Vec delta(ng + ni);
    delta.head(ng) = x.head(ng);
    delta.tail(ni) = x.tail(ni);
    const Vec P = injections(s.red, delta);
    Vec dx(2 * ng + ni);
    dx.head(ng) = x.segment(ng, ng);
    for (int k = 0; k < ng; ++k)
      dx(ng + k) =
          (s.Pm(k) - P(k) - s.park.D(k) * x(ng + k)) / s.park.M(k);
    for (int j = 0; j < ni; ++j)
      dx(2 * ng + j) = s.park.mp * (s.Pset(j) - P(ng + j));
    return dx;
  };
  return integrate(s, x0_offset, horizon, dt, rhs, /*watch_wedge=*/true);
}

Trajectory simulate_linear(const NetworkCase& cse, const Vec& x0_offset,
                           double horizon, double dt) {
  SimSetup s = prepare(cse, dt);
  const int ng = s.ng, ni = s.ni;
  const int dim = 2 * ng + ni;

  Vec xeq(dim);
  xeq.head(ng) = s.red.delta0.head(ng);
  xeq.segment(ng, ng).setZero();
  xeq.tail(ni) = s.red.delta0.tail(ni);

  auto rhs = [&s, &xeq](const Vec& x) { return Vec(s.A * (x - xeq)); };
  // The linear twin never truncates: it exists to share the integrator, not
  // the wedge semantics.
  return integrate(s, x0_offset, horizon, dt, rhs, /*watch_wedge=*/false);
}

ModeEstimate estimate_mode(const Trajectory& traj, const std::string& channel) {
  int col = -1;
  for (size_t k = 0; k < traj.labels.size(); ++k)
    if (traj.labels[k] == channel) col = static_cast<int>(k);
  if (col < 0)
    throw ValidationError("unknown trajectory channel '" + channel + "'");

  const int N = static_cast<int>(traj.t.size());
  if (N < 16)
    throw NumericalError("non-oscillatory signal: trajectory too short (" +
                         std::to_string(N) + " samples)");
  const double dt = traj.t(1) - traj.t(0);
  const double T = traj.t(N - 1) - traj.t(0);

  Vec y = traj.states.col(col);
  y.array() -= y.mean();

  // Gate 1: an oscillation must actually cross its mean a few times.
  int sign_changes = 0;
  for (int i = 1; i < N; ++i)
    if (y(i - 1) * y(i) < 0.0) ++sign_changes;
  if (sign_changes < 3)
    throw NumericalError("non-oscillatory signal: only " +
                         std::to_string(sign_changes) + " mean crossings");

  // Windowed fine-grid spectrum, 0..Nyquist.
  Vec w(N);
  for (int i = 0; i < N; ++i)
    w(i) = 0.5 * (1.0 - std::cos(2.0 * kPi * i / (N - 1)));
  const Vec yw = y.cwiseProduct(w);
  const int F = 4096;
  const double f_nyq = 0.5 / dt;
  const double df = f_nyq / F;
  Vec mag2(F + 1);
  for (int k = 0; k <= F; ++k) {
    const double om = 2.0 * kPi * (k * df);
    Cplx acc(0.0, 0.0);
    for (int i = 0; i < N; ++i) {
      const double ph = om * (i * dt);
      acc += yw(i) * Cplx(std::cos(ph), -std::sin(ph));
    }
    mag2(k) = std::norm(acc);
  }

  // Gate 2: interior local maximum above the resolvable floor 2/T Hz.
  const double fmin_cut = 2.0 / T;
  int kpk = -1;
  double best = 0.0;
  for (int k = 1; k < F; ++k) {
    if (k * df <= fmin_cut) continue;
    if (mag2(k) >= mag2(k - 1) && mag2(k) >= mag2(k + 1) && mag2(k) > best) {
      best = mag2(k);
      kpk = k;
    }
  }
  if (kpk < 0 || best <= 0.0)
    throw NumericalError("non-oscillatory signal: no interior spectral peak above " +
                         io::fmt(fmin_cut) + " Hz");

  // Quadratic refinement on log magnitude.
  const double p1 = 0.5 * std::log(std::max(mag2(kpk - 1), 1e-300));
  const double p2 = 0.5 * std::log(std::max(mag2(kpk), 1e-300));
  const double p3 = 0.5 * std::log(std::max(mag2(kpk + 1), 1e-300));
  double shift = 0.0;
  const double curv = p1 - 2.0 * p2 + p3;
  if (curv < 0.0) shift = 0.5 * (p1 - p3) / curv;
  const double f_hat = (kpk + shift) * df;

  // Heterodyne to baseband and low-pass with a truncated Gaussian.
  const double bw = 0.15 * f_hat;
  const double sig_t = 1.0 / (2.0 * kPi * bw);
  const int L = static_cast<int>(std::floor(4.0 * sig_t / dt));
  if (2 * L + 4 >= N)
    throw NumericalError("non-oscillatory signal: filter support exceeds the record");
  Vec g(2 * L + 1);
  for (int m = -L; m <= L; ++m)
    g(m + L) = std::exp(-0.5 * std::pow(m * dt / sig_t, 2));
  g /= g.sum();

  std::vector<Cplx> z(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) {
    const double ph = 2.0 * kPi * f_hat * (i * dt);
    z[static_cast<size_t>(i)] = y(i) * Cplx(std::cos(ph), -std::sin(ph));
  }
  // Band-filtered real signal: re-modulated filtered baseband.
  Vec yb = Vec::Zero(N);
  for (int i = L; i < N - L; ++i) {
    Cplx acc(0.0, 0.0);
    for (int m = -L; m <= L; ++m)
      acc += g(m + L) * z[static_cast<size_t>(i - m)];
    const double ph = 2.0 * kPi * f_hat * (i * dt);
    yb(i) = 2.0 * (acc * Cplx(std::cos(ph), std::sin(ph))).real();
  }

  // Extrema between consecutive zero crossings, inside the filter-valid core.
  struct Ext {
    double t, amp;
  };
  std::vector<Ext> ext;
  int seg_start = L;
  for (int i = L + 1; i < N - L; ++i) {
    const bool crossing = yb(i - 1) * yb(i) < 0.0;
    const bool last = (i == N - L - 1);
    if (!crossing && !last) continue;
    const int seg_end = crossing ? i - 1 : i;
    if (seg_end - seg_start >= 2) {
      int im = seg_start;
      for (int k = seg_start; k <= seg_end; ++k)
        if (std::abs(yb(k)) > std::abs(yb(im))) im = k;
      if (im > seg_start && im < seg_end) {
        // Parabolic refinement of the extremum amplitude and instant.
        const double a1 = yb(im - 1), a2 = yb(im), a3 = yb(im + 1);
        const double c = a1 - 2.0 * a2 + a3;
        double dx = 0.0, av = a2;
        if (c != 0.0) {
          dx = 0.5 * (a1 - a3) / c;
          av = a2 - 0.25 * (a1 - a3) * dx;
        }
        ext.push_back({(im + dx) * dt, std::abs(av)});
      }
    }
    seg_start = i;
  }
  if (ext.size() < 4)
    throw NumericalError("non-oscillatory signal: only " +
                         std::to_string(ext.size()) +
                         " usable extrema for the decrement fit");

  // Log-decrement: ln(amp) is linear in t with slope -sigma.
  const size_t ne = ext.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const Ext& e : ext) {
    const double ly = std::log(std::max(e.amp, 1e-300));
    sx += e.t;
    sy += ly;
    sxx += e.t * e.t;
    sxy += e.t * ly;
  }
  const double denom = ne * sxx - sx * sx;
  const double slope = (ne * sxy - sx * sy) / denom;
  const double sigma = -slope;

  // Slope standard error -> damping uncertainty via d zeta / d sigma.
  double ss_res = 0.0;
  const double intercept = (sy - slope * sx) / ne;
  for (const Ext& e : ext) {
    const double r = std::log(std::max(e.amp, 1e-300)) - (intercept + slope * e.t);
    ss_res += r * r;
  }
  const double slope_se =
      (ne > 2) ? std::sqrt(ss_res / (ne - 2) / (sxx - sx * sx / ne)) : 0.0;

  ModeEstimate est;
  est.f_hz = f_hat;
  est.f_unc = df;
  est.sigma = sigma;
  const double hyp = std::hypot(sigma, 2.0 * kPi * f_hat);
  est.zeta = (hyp > 0.0) ? sigma / hyp : 0.0;
  const double om = 2.0 * kPi * f_hat;
  est.zeta_unc = (hyp > 0.0) ? (om * om / (hyp * hyp * hyp)) * slope_se : 0.0;
  est.n_extrema = static_cast<int>(ne);
  return est;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::vector<std::string> head;
  head.push_back("t");
  for (const auto& l : traj.labels) head.push_back(l);
  std::string out = io::csv_row(head);
  for (int i = 0; i < traj.t.size(); ++i) {
    std::vector<std::string> row;
    row.push_back(io::fmt(traj.t(i)));
    for (int c = 0; c < traj.states.cols(); ++c)
      row.push_back(io::fmt(traj.states(i, c)));
    out += io::csv_row(row);
  }
  return out;
}

}  // namespace gridform
