#include "gridform/sweep.hpp"

#include "gridform/io.hpp"
#include "gridform/statespace.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

namespace gridform {

namespace {

// Worker count: GRIDFORM_SSA_THREADS caps (and 0/unset means hardware).
int worker_count(size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("GRIDFORM_SSA_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
  }
  return static_cast<int>(std::min<size_t>(hw, std::max<size_t>(jobs, 1)));
}

// Runs fn(i) for i in [0, n) on the pool.  Results land in caller-owned slots
// indexed by i, so scheduling order cannot affect output.  The lowest-index
// exception wins, keeping failures deterministic too.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
  const int workers = worker_count(n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (size_t i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
}

void require_monotone(const std::vector<double>& v, const std::string& what) {
  for (size_t i = 1; i < v.size(); ++i) {
    const bool up = v[1] > v[0];
    if ((up && v[i] <= v[i - 1]) || (!up && v[i] >= v[i - 1]))
      throw ValidationError(what + " axis must be strictly monotone (value " +
                            io::fmt(v[i]) + " at index " + std::to_string(i) + ")");
  }
}

// Common effective droop for a uniform setting; rejects mixed-rating fleets
// whose system-base droops would diverge.
double uniform_mp(const DevicePark& park, double mp_hat) {
  const double mp = droop_from_setting(mp_hat, park.S_mva(0), park.base_mva);
  for (int j = 1; j < park.S_mva.size(); ++j) {
    const double mpj = droop_from_setting(mp_hat, park.S_mva(j), park.base_mva);
    if (std::abs(mpj - mp) > 1e-9 * std::max(1.0, std::abs(mp)))
      throw ValidationError("droop sweep needs equal GFM ratings to keep the "
                            "effective droop uniform (rating " + io::fmt(park.S_mva(j)) +
                            " MVA vs " + io::fmt(park.S_mva(0)) + " MVA)");
  }
  return mp;
}

// Shared sweep core: one eigensolve per park variant, then serial stitching.
SweepResult run_sweep(const JacobianSet& jac, const std::vector<DevicePark>& parks,
                      const std::vector<double>& values, const std::string& name) {
  SweepResult sr;
  sr.param_name = name;
  sr.values = values;

  std::vector<std::vector<Mode>> per_point(values.size());
  parallel_for(values.size(), [&](size_t i) {
    per_point[i] = eigen_modes(assemble_state_matrix(jac, parks[i]));
  });

  // Freeze identities from the first point.
  classify_inter_area(per_point[0]);
  std::vector<CVec> prev_u;
  for (const Mode& m : per_point[0]) {
    ModeLocus locus;
    locus.mode_id = m.mode_id;
    locus.klass = m.klass;
    locus.points.resize(values.size());
    LocusPoint& p = locus.points[0];
    p.param = values[0];
    p.lambda = m.lambda;
    p.freq_hz = m.freq_hz;
    p.damping = m.damping;
    p.tracked = true;
    p.overlap = 1.0;
    sr.loci.push_back(std::move(locus));
    prev_u.push_back(m.u);
  }

  // Greedy overlap matching, strongest pairs first, each candidate used once.
  for (size_t t = 1; t < values.size(); ++t) {
    const std::vector<Mode>& cand = per_point[t];
    const size_t nl = sr.loci.size(), nc = cand.size();
    Mat ov(nl, nc);
    for (size_t l = 0; l < nl; ++l)
      for (size_t c = 0; c < nc; ++c)
        ov(static_cast<int>(l), static_cast<int>(c)) =
            std::abs((cand[c].u.adjoint() * prev_u[l])(0, 0));

    std::vector<bool> locus_done(nl, false), cand_used(nc, false);
    for (size_t pick = 0; pick < std::min(nl, nc); ++pick) {
      double best = -1.0;
      size_t bl = 0, bc = 0;
      for (size_t l = 0; l < nl; ++l) {
        if (locus_done[l]) continue;
        for (size_t c = 0; c < nc; ++c) {
          if (cand_used[c]) continue;
          const double o = ov(static_cast<int>(l), static_cast<int>(c));
          if (o > best) {
            best = o;
            bl = l;
            bc = c;
          }
        }
      }
      locus_done[bl] = true;
      cand_used[bc] = true;

      ModeLocus& locus = sr.loci[bl];
      LocusPoint& p = locus.points[t];
      const Mode& m = cand[bc];
      p.param = values[t];
      p.lambda = m.lambda;
      p.freq_hz = m.freq_hz;
      p.damping = m.damping;
      p.tracked = true;
      p.overlap = best;
      prev_u[bl] = m.u;
      if (best < 0.9) {
        locus.breaks.push_back(static_cast<int>(t));
        sr.warnings.push_back("mode " + std::to_string(locus.mode_id) +
                              ": tracking break at " + name + " = " +
                              io::fmt(values[t]) + " (overlap " + io::fmt(best) +
                              "); locus split");
      }
    }
    for (size_t l = 0; l < nl; ++l) {
      if (locus_done[l]) continue;
      sr.loci[l].points[t].param = values[t];
      sr.loci[l].breaks.push_back(static_cast<int>(t));
      sr.warnings.push_back("mode " + std::to_string(sr.loci[l].mode_id) +
                            ": no spectral branch left to track at " + name +
                            " = " + io::fmt(values[t]));
    }
    for (size_t c = 0; c < nc; ++c) {
      if (cand_used[c]) continue;
      sr.warnings.push_back("untracked spectral branch at " + name + " = " +
                            io::fmt(values[t]) + " (lambda = " +
                            io::fmt_complex(cand[c].lambda.real(), cand[c].lambda.imag()) +
                            ")");
    }
  }

  // Damping monotonicity annotations, restarted at every tracking break.
  for (ModeLocus& locus : sr.loci) {
    int seg_start = -1;
    int dir = 0;  // 0 flat, +1 nondecreasing, -1 nonincreasing
    auto flush = [&](int end_idx) {
      if (seg_start < 0 || end_idx <= seg_start) return;
      MonotoneSegment seg;
      seg.begin = seg_start;
      seg.end = end_idx;
      seg.direction = dir > 0 ? "nondecreasing" : (dir < 0 ? "nonincreasing" : "flat");
      locus.segments.push_back(seg);
    };
    for (size_t t = 0; t < locus.points.size(); ++t) {
      const bool is_break =
          std::find(locus.breaks.begin(), locus.breaks.end(), static_cast<int>(t)) !=
          locus.breaks.end();
      if (!locus.points[t].tracked || is_break) {
        flush(static_cast<int>(t) - 1);
        seg_start = locus.points[t].tracked ? static_cast<int>(t) : -1;
        dir = 0;
        continue;
      }
      if (seg_start < 0) {
        seg_start = static_cast<int>(t);
        dir = 0;
        continue;
      }
      const double step =
          locus.points[t].damping - locus.points[t - 1].damping;
      const int s = (step > 0.0) ? 1 : (step < 0.0 ? -1 : 0);
      if (s != 0 && dir != 0 && s != dir) {
        flush(static_cast<int>(t) - 1);
        seg_start = static_cast<int>(t) - 1;
        dir = s;
      } else if (s != 0) {
        dir = s;
      }
    }
    flush(static_cast<int>(locus.points.size()) - 1);
  }
  return sr;
}

}  // namespace

SweepResult sweep_droop(const NetworkCase& cse,
                        const std::vector<double>& mp_hat_values) {
  if (mp_hat_values.size() < 3)
    throw ValidationError("droop sweep needs at least 3 grid points (got " +
                          std::to_string(mp_hat_values.size()) + ")");
  require_monotone(mp_hat_values, "droop");
  for (double v : mp_hat_values)
    if (!(v > 0.0))
      throw ValidationError("droop sweep values must be positive (got " + io::fmt(v) + ")");

  const ReducedNetwork red = kron_reduce(cse);
  const JacobianSet jac = build_jacobians(red);
  const DevicePark base = build_park(cse);

  std::vector<DevicePark> parks;
  parks.reserve(mp_hat_values.size());
  for (double mh : mp_hat_values) {
    DevicePark p = base;
    p.mp_hat.setConstant(mh);
    p.mp = uniform_mp(base, mh);
    parks.push_back(std::move(p));
  }
  return run_sweep(jac, parks, mp_hat_values, "droop");
}

SweepResult sweep_size(const NetworkCase& cse, const std::vector<double>& s_total_mva) {
  if (s_total_mva.empty())
    throw ValidationError("capacity sweep needs at least one grid point");
  require_monotone(s_total_mva, "size");
  for (double v : s_total_mva)
    if (!(v > 0.0))
      throw ValidationError("capacity sweep values must be positive (got " +
                            io::fmt(v) + ")");

  const ReducedNetwork red = kron_reduce(cse);
  const JacobianSet jac = build_jacobians(red);
  const DevicePark base = build_park(cse);
  const double s0 = base.S_mva.sum();

  std::vector<DevicePark> parks;
  parks.reserve(s_total_mva.size());
  for (double st : s_total_mva) {
    const double scale = st / s0;
    DevicePark p = base;
    p.S_mva = base.S_mva * scale;
    // Fixed settings, scaled ratings: the effective droop scales inversely.
    p.mp = base.mp / scale;
    parks.push_back(std::move(p));
  }
  return run_sweep(jac, parks, s_total_mva, "size");
}

std::vector<ModeReversal> detect_reversal(const SweepResult& sr) {
  if (sr.values.size() < 5)
    throw ValidationError("reversal detection needs at least 5 grid points (got " +
                          std::to_string(sr.values.size()) + ")");

  std::vector<ModeReversal> out;
  for (const ModeLocus& locus : sr.loci) {
    std::vector<std::pair<double, double>> pts;  // (param, zeta)
    for (const LocusPoint& p : locus.points)
      if (p.tracked) pts.emplace_back(p.param, p.damping);

    ModeReversal rev;
    rev.mode_id = locus.mode_id;
    rev.klass = locus.klass;
    if (pts.size() < 3) {
      rev.note = "insufficient tracked points";
      out.push_back(rev);
      continue;
    }

    size_t imax = 0;
    for (size_t i = 1; i < pts.size(); ++i)
      if (pts[i].second > pts[imax].second) imax = i;

    if (imax == 0 || imax + 1 == pts.size()) {
      rev.interior = false;
      rev.param_at_max = pts[imax].first;
      rev.zeta_max = pts[imax].second;
      rev.note = "no interior reversal";
      out.push_back(rev);
      continue;
    }

    // Quadratic through the discrete max and its neighbors (non-uniform grid).
    const auto [x1, y1] = pts[imax - 1];
    const auto [x2, y2] = pts[imax];
    const auto [x3, y3] = pts[imax + 1];
    const double d21 = x2 - x1, d32 = x3 - x2;
    const double num = (y1 - y2) * d32 * d32 - (y3 - y2) * d21 * d21;
    const double den = (y1 - y2) * d32 + (y3 - y2) * d21;
    double xv = x2, yv = y2;
    if (den != 0.0) {
      xv = x2 + 0.5 * num / den;
      // Evaluate the same parabola at its vertex via Lagrange interpolation.
      const double l1 = ((xv - x2) * (xv - x3)) / ((x1 - x2) * (x1 - x3));
      const double l2 = ((xv - x1) * (xv - x3)) / ((x2 - x1) * (x2 - x3));
      const double l3 = ((xv - x1) * (xv - x2)) / ((x3 - x1) * (x3 - x2));
      yv = l1 * y1 + l2 * y2 + l3 * y3;
    }
    rev.interior = true;
    rev.param_at_max = xv;
    rev.zeta_max = yv;
    out.push_back(rev);
  }
  return out;
}

std::string sweep_csv(const SweepResult& sr) {
  std::string out = io::csv_row(
      {"param_name", "param_value", "mode_id", "re", "im", "freq_hz", "damping_pct"});
  for (size_t t = 0; t < sr.values.size(); ++t) {
    for (const ModeLocus& locus : sr.loci) {
      const LocusPoint& p = locus.points[t];
      if (!p.tracked) continue;
      out += io::csv_row({sr.param_name, io::fmt(p.param),
                          std::to_string(locus.mode_id), io::fmt(p.lambda.real()),
                          io::fmt(p.lambda.imag()), io::fmt(p.freq_hz),
                          io::fmt(100.0 * p.damping)});
    }
  }
  return out;
}

std::string reversal_json(const SweepResult& sr, const std::vector<ModeReversal>& revs) {
  using ordered_json = nlohmann::ordered_json;
  ordered_json root;
  root["param_name"] = sr.param_name;
  ordered_json modes = ordered_json::object();
  for (const ModeReversal& r : revs) {
    ordered_json jm;
    jm["class"] = r.klass;
    jm["interior"] = r.interior;
    jm["param_at_max"] = r.param_at_max;
    jm["zeta_max_pct"] = 100.0 * r.zeta_max;
    if (!r.note.empty()) jm["note"] = r.note;
    for (const ModeLocus& locus : sr.loci) {
      if (locus.mode_id != r.mode_id) continue;
      ordered_json segs = ordered_json::array();
      for (const MonotoneSegment& s : locus.segments)
        segs.push_back({{"begin", s.begin}, {"end", s.end}, {"direction", s.direction}});
      jm["segments"] = segs;
      ordered_json brk = ordered_json::array();
      for (int b : locus.breaks) brk.push_back(b);
      jm["breaks"] = brk;
    }
    modes[std::to_string(r.mode_id)] = jm;
  }
  root["modes"] = modes;
  ordered_json warn = ordered_json::array();
  for (const auto& w : sr.warnings) warn.push_back(w);
  root["warnings"] = warn;
  return root.dump(2) + "\n";
}

}  // namespace gridform
