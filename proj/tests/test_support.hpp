#pragma once

// Shared fixtures for the test binaries: the bundled two-machine case, a
// deterministic RNG (fixed-seed mt19937_64 with an explicit 53-bit uniform so
// draws are identical across platforms), and the two random-case generators
// the randomized suites run on.

#include "gridform/devices.hpp"
#include "gridform/modal.hpp"
#include "gridform/netmodel.hpp"
#include "gridform/statespace.hpp"
#include "gridform/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#ifndef GRIDFORM_CASE_DIR
#error "tests must be compiled with GRIDFORM_CASE_DIR"
#endif

namespace ts {

inline std::string toy_path() {
  return std::string(GRIDFORM_CASE_DIR) + "/toy2x3.json";
}

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double uniform(double lo, double hi) {
    const double u = std::ldexp(static_cast<double>(eng() >> 11), -53);
    return lo + (hi - lo) * u;
  }
  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
};

inline gridform::DevicePark make_park(const gridform::Vec& M, const gridform::Vec& D,
                                      int n_i, double mp) {
  gridform::DevicePark park;
  park.M = M;
  park.D = D;
  park.S_mva = gridform::Vec::Constant(n_i, 100.0);
  park.mp_hat = gridform::Vec::Constant(n_i, mp);
  park.mq_hat = gridform::Vec::Zero(n_i);
  park.tau = gridform::Vec::Constant(n_i, 0.02);
  park.base_mva = 100.0;
  park.omega0_rad_s = 2.0 * 3.14159265358979323846 * 60.0;
  park.mp = mp;
  return park;
}

struct RandomCase {
  gridform::ReducedNetwork red;
  gridform::JacobianSet jac;
  gridform::DevicePark park;
};

// Random grounded network: a connected mesh whose SG-touching links are weak
// (tie-line-like) and whose GFM-GFM links are stiff, every node grounded, SG
// counts below GFM counts.  d_scale thins the SG damping (the expansion
// diagnostics want a lightly damped regime).
inline RandomCase gen_reduced(Rng& rng, double d_scale = 1.0) {
  using gridform::Mat;
  using gridform::Vec;

  const int ng = rng.uniform_int(2, 6);
  const int ni = rng.uniform_int(std::max(3, ng + 1), 12);
  const int n = ng + ni;

  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = n - 1; k > 0; --k)
    std::swap(perm[static_cast<size_t>(k)],
              perm[static_cast<size_t>(rng.uniform_int(0, k))]);

  Mat W = Mat::Zero(n, n);
  auto draw_w = [&](int a, int b) {
    return (a < ng || b < ng) ? rng.uniform(0.15, 0.7) : rng.uniform(2.0, 7.0);
  };
  // Random spanning tree keeps the mesh connected; extra links thicken it.
  for (int k = 1; k < n; ++k) {
    const int a = perm[static_cast<size_t>(k)];
    const int b = perm[static_cast<size_t>(rng.uniform_int(0, k - 1))];
    const double w = draw_w(a, b);
    W(a, b) += w;
    W(b, a) += w;
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (rng.bernoulli(0.25)) {
        const double w = draw_w(a, b);
        W(a, b) += w;
        W(b, a) += w;
      }

  Mat B = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) {
        B(a, a) += W(a, b);
        B(a, b) -= W(a, b);
      }
  for (int k = 0; k < n; ++k)
    B(k, k) += (k < ng) ? rng.uniform(0.1, 0.5) : rng.uniform(2.5, 6.0);

  RandomCase rc;
  rc.red.B_red = B;
  rc.red.E = Vec::NullaryExpr(n, [&](Eigen::Index) { return rng.uniform(0.98, 1.06); });
  rc.red.delta0 =
      Vec::NullaryExpr(n, [&](Eigen::Index) { return rng.uniform(-0.25, 0.25); });
  rc.red.n_g = ng;
  rc.red.n_i = ni;
  for (int k = 0; k < ng; ++k) rc.red.node_ids.push_back("g" + std::to_string(k + 1));
  for (int j = 0; j < ni; ++j) rc.red.node_ids.push_back("i" + std::to_string(j + 1));
  rc.red.interior_cond = 1.0;
  rc.jac = gridform::build_jacobians(rc.red);

  const Vec M =
      Vec::NullaryExpr(ng, [&](Eigen::Index) { return rng.uniform(0.03, 0.09); });
  const Vec D = Vec::NullaryExpr(
      ng, [&](Eigen::Index) { return d_scale * rng.uniform(0.002, 0.006); });
  rc.park = make_park(M, D, ni, rng.uniform(1.0, 5.0));
  return rc;
}

// Assembles a JacobianSet directly from blocks, reproducing the library's
// diagonal/Laplacian split (block row sums on the diagonal side).
inline gridform::JacobianSet blocks_to_jacobian(const gridform::Mat& Kgg,
                                                const gridform::Mat& Kgi,
                                                const gridform::Mat& Kii) {
  using gridform::Mat;
  using gridform::Vec;
  const int ng = static_cast<int>(Kgg.rows());
  const int ni = static_cast<int>(Kii.rows());

  gridform::JacobianSet jac;
  jac.n_g = ng;
  jac.n_i = ni;
  jac.Kgg = Kgg;
  jac.Kgi = Kgi;
  jac.Kig = Kgi.transpose();
  jac.Kii = Kii;
  jac.K.resize(ng + ni, ng + ni);
  jac.K << Kgg, Kgi, jac.Kig, Kii;
  jac.shunt_diag = Vec::Zero(ng + ni);
  for (int k = 0; k < ng; ++k) jac.node_ids.push_back("g" + std::to_string(k + 1));
  for (int j = 0; j < ni; ++j) jac.node_ids.push_back("i" + std::to_string(j + 1));

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

struct PoiCase {
  gridform::JacobianSet jac;
  gridform::DevicePark park;
  double gamma = 0.0;
};

// Parks of GFM units behind orthogonal points of interconnection: each SG sees
// its own disjoint GFM cluster, all coupling rows share one norm, the GFM
// self-stiffness is a scaled identity, and the SG fleet is homogeneous.  This
// is the family for which the damping-enhancement exclusion argument is sharp,
// so it is what the exclusion acceptance run samples.
inline PoiCase gen_poi(Rng& rng) {
  using gridform::Mat;
  using gridform::Vec;

  const int ng = rng.uniform_int(2, 6);
  const int ni = rng.uniform_int(std::max(3, ng + 1), 12);
  const int n = ng + ni;

  const Vec E =
      Vec::NullaryExpr(n, [&](Eigen::Index) { return rng.uniform(0.98, 1.06); });
  const Vec d0 =
      Vec::NullaryExpr(n, [&](Eigen::Index) { return rng.uniform(-0.25, 0.25); });

  // Weak SG-SG mesh.
  std::vector<int> perm(static_cast<size_t>(ng));
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = ng - 1; k > 0; --k)
    std::swap(perm[static_cast<size_t>(k)],
              perm[static_cast<size_t>(rng.uniform_int(0, k))]);
  Mat W = Mat::Zero(ng, ng);
  for (int k = 1; k < ng; ++k) {
    const int a = perm[static_cast<size_t>(k)];
    const int b = perm[static_cast<size_t>(rng.uniform_int(0, k - 1))];
    const double w = rng.uniform(0.15, 0.7);
    W(a, b) += w;
    W(b, a) += w;
  }
  for (int a = 0; a < ng; ++a)
    for (int b = a + 1; b < ng; ++b)
      if (rng.bernoulli(0.25)) {
        const double w = rng.uniform(0.15, 0.7);
        W(a, b) += w;
        W(b, a) += w;
      }

  // Disjoint clusters: GFM j hangs off SG j mod ng, rows rescaled to a common
  // norm so the coupling block has orthogonal equal-norm rows.
  Mat Kgi = Mat::Zero(ng, ni);
  for (int j = 0; j < ni; ++j) {
    const int g = j % ng;
    Kgi(g, j) = -E(g) * E(ng + j) * rng.uniform(0.5, 1.5) *
                std::cos(d0(g) - d0(ng + j));
  }
  const double row_norm = rng.uniform(1.15, 1.6);
  for (int g = 0; g < ng; ++g) {
    const double nrm = Kgi.row(g).norm();
    Kgi.row(g) *= row_norm / nrm;
  }

  Mat Kgg = Mat::Zero(ng, ng);
  for (int a = 0; a < ng; ++a)
    for (int b = 0; b < ng; ++b)
      if (a != b) Kgg(a, b) = -E(a) * E(b) * W(a, b) * std::cos(d0(a) - d0(b));
  for (int a = 0; a < ng; ++a) {
    double off = 0.0;
    for (int b = 0; b < ng; ++b)
      if (b != a) off += Kgg(a, b);
    Kgg(a, a) = -off - Kgi.row(a).sum() + E(a) * rng.uniform(0.1, 0.5) * std::cos(d0(a));
  }

  // GFM self-stiffness: identity scaled just above the strongest column pull,
  // which keeps every folded coupling diagonally covered.
  double coup_max = 0.0;
  for (int j = 0; j < ni; ++j) coup_max = std::max(coup_max, -Kgi.col(j).sum());
  const double gamma = coup_max + rng.uniform(0.05, 0.3);

  PoiCase pc;
  pc.gamma = gamma;
  pc.jac = blocks_to_jacobian(Kgg, Kgi, gamma * Mat::Identity(ni, ni));

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Kgg + Kgg.transpose().eval()));
  const double wt = rng.uniform(2.0, 5.5);
  const double m0 = es.eigenvalues().maxCoeff() / (wt * wt);
  pc.park = make_park(Vec::Constant(ng, m0),
                      Vec::Constant(ng, rng.uniform(0.001, 0.004)), ni, 1e-3);
  return pc;
}

// All eigenvalues strictly in the open left half plane.
inline bool stable(const gridform::Mat& A) {
  Eigen::EigenSolver<gridform::Mat> es(A);
  return es.eigenvalues().real().maxCoeff() < 0.0;
}

// Eigenvalue of A with positive imaginary part nearest to target; requires one
// to exist (returns false otherwise).
inline bool nearest_pos_imag_eig(const gridform::Mat& A, gridform::Cplx target,
                                 gridform::Cplx& out) {
  Eigen::EigenSolver<gridform::Mat> es(A);
  bool found = false;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const gridform::Cplx l = es.eigenvalues()(i);
    if (l.imag() <= 0.0) continue;
    const double d = std::abs(l - target);
    if (d < best) {
      best = d;
      out = l;
      found = true;
    }
  }
  return found;
}

}  // namespace ts
