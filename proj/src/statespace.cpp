#include "gridform/statespace.hpp"

#include "gridform/io.hpp"

#include <cmath>
#include <cstring>

namespace gridform {

namespace {

// Fingerprint a list of matrices/vectors by hashing their raw double bytes.
// Only used for provenance stamps, so process-local determinism is enough.
std::string hash_blocks(std::initializer_list<const Mat*> mats,
                        std::initializer_list<const Vec*> vecs,
                        std::initializer_list<double> scalars) {
  std::string bytes;
  auto add = [&bytes](const double* p, size_t count) {
    const char* raw = reinterpret_cast<const char*>(p);
    bytes.append(raw, raw + count * sizeof(double));
  };
  for (const Mat* m : mats) add(m->data(), static_cast<size_t>(m->size()));
  for (const Vec* v : vecs) add(v->data(), static_cast<size_t>(v->size()));
  for (double s : scalars) add(&s, 1);
  return io::hex64(io::fnv1a64(bytes));
}

}  // namespace

StateMatrix assemble_state_matrix(const JacobianSet& jac, const DevicePark& park) {
  const int ng = jac.n_g;
  const int ni = jac.n_i;
  if (static_cast<int>(park.M.size()) != ng)
    throw ValidationError("park/jacobian mismatch: " + std::to_string(park.M.size()) +
                          " SGs in park vs " + std::to_string(ng) + " in network");
  if (static_cast<int>(park.tau.size()) != ni)
    throw ValidationError("park/jacobian mismatch: " + std::to_string(park.tau.size()) +
                          " GFMs in park vs " + std::to_string(ni) + " in network");

  const Vec Minv = park.M.cwiseInverse();

  StateMatrix sm;
  sm.n_g = ng;
  sm.n_i = ni;
  sm.mp = park.mp;
  sm.A = Mat::Zero(2 * ng + ni, 2 * ng + ni);
  sm.A.block(0, ng, ng, ng).setIdentity();
  sm.A.block(ng, 0, ng, ng) = (-Minv).asDiagonal() * jac.Kgg;
  sm.A.block(ng, ng, ng, ng) = (-Minv.cwiseProduct(park.D)).asDiagonal().toDenseMatrix();
  sm.A.block(ng, 2 * ng, ng, ni) = (-Minv).asDiagonal() * jac.Kgi;
  sm.A.block(2 * ng, 0, ni, ng) = -park.mp * jac.Kig;
  sm.A.block(2 * ng, 2 * ng, ni, ni) = -park.mp * jac.Kii;

  sm.state_labels.reserve(2 * ng + ni);
  for (int k = 0; k < ng; ++k) sm.state_labels.push_back("delta_" + jac.node_ids[k]);
  for (int k = 0; k < ng; ++k) sm.state_labels.push_back("omega_" + jac.node_ids[k]);
  for (int j = 0; j < ni; ++j) sm.state_labels.push_back("delta_" + jac.node_ids[ng + j]);

  // Fingerprint the blocks A is actually assembled from, not just the parent
  // matrix: a block edited in place must change the hash.
  sm.jacobian_hash = hash_blocks({&jac.Kgg, &jac.Kgi, &jac.Kig, &jac.Kii}, {},
                                 {double(ng), double(ni)});
  sm.park_hash = hash_blocks({}, {&park.M, &park.D, &park.S_mva, &park.mp_hat, &park.tau},
                             {park.mp, park.base_mva});
  return sm;
}

Mat state_matrix_dmp(const JacobianSet& jac) {
  const int ng = jac.n_g;
  const int ni = jac.n_i;
  Mat dA = Mat::Zero(2 * ng + ni, 2 * ng + ni);
  dA.block(2 * ng, 0, ni, ng) = -jac.Kig;
  dA.block(2 * ng, 2 * ng, ni, ni) = -jac.Kii;
  return dA;
}

std::string state_matrix_csv(const StateMatrix& sm) {
  std::string out;
  std::vector<std::string> head;
  head.push_back("state");
  for (const auto& l : sm.state_labels) head.push_back(l);
  out += io::csv_row(head);
  for (int r = 0; r < sm.A.rows(); ++r) {
    std::vector<std::string> row;
    row.push_back(sm.state_labels[static_cast<size_t>(r)]);
    for (int c = 0; c < sm.A.cols(); ++c) row.push_back(io::fmt(sm.A(r, c)));
    out += io::csv_row(row);
  }
  return out;
}

LambdaEval lambda_matrix(const JacobianSet& jac, const DevicePark& park, Cplx lambda) {
  const int ng = jac.n_g;
  const int ni = jac.n_i;
  const double mp = park.mp;

  CMat res = lambda * CMat::Identity(ni, ni) + Cplx(mp) * jac.Kii;
  Eigen::JacobiSVD<CMat> svd(res, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (smin <= 1e-12 * std::max(1.0, smax))
    throw NumericalError("inverter resolvent singular at lambda = " +
                         io::fmt_complex(lambda.real(), lambda.imag()) +
                         " (smallest singular value " + io::fmt(smin) + ")");

  const Vec Minv = park.M.cwiseInverse();
  CMat inner = jac.Kgg.cast<Cplx>() -
               Cplx(mp) * jac.Kgi.cast<Cplx>() * svd.solve(jac.Kig.cast<Cplx>());

  LambdaEval ev;
  ev.resolvent_smin = smin;
  ev.Lambda = lambda * lambda * CMat::Identity(ng, ng);
  ev.Lambda += lambda * Minv.cwiseProduct(park.D).asDiagonal().toDenseMatrix().cast<Cplx>();
  ev.Lambda += Minv.asDiagonal().toDenseMatrix().cast<Cplx>() * inner;
  return ev;
}

LambdaEvalL lambda_matrix_ld(const JacobianSet& jac, const DevicePark& park,
                             LCplx lambda) {
  const int ng = jac.n_g;
  const int ni = jac.n_i;
  const LReal mp = static_cast<LReal>(park.mp);

  const LCMat Kgg = jac.Kgg.cast<LCplx>();
  const LCMat Kgi = jac.Kgi.cast<LCplx>();
  const LCMat Kig = jac.Kig.cast<LCplx>();
  const LCMat Kii = jac.Kii.cast<LCplx>();

  LCMat res = lambda * LCMat::Identity(ni, ni) + LCplx(mp) * Kii;
  Eigen::JacobiSVD<LCMat> svd(res, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const LReal smin = svd.singularValues().minCoeff();
  const LReal smax = svd.singularValues().maxCoeff();
  if (smin <= 1e-12L * std::max<LReal>(1.0L, smax))
    throw NumericalError("inverter resolvent singular at lambda = " +
                         io::fmt_complex(static_cast<double>(lambda.real()),
                                         static_cast<double>(lambda.imag())) +
                         " (smallest singular value " +
                         io::fmt(static_cast<double>(smin)) + ")");

  // One solve gives the resolvent applied to K_ig; a second application of the
  // same factorization gives the squared-resolvent term of Lambda'.
  LCMat RKig = svd.solve(Kig);    // (lambda I + mp Kii)^-1 Kig
  LCMat R2Kig = svd.solve(RKig);  // (lambda I + mp Kii)^-2 Kig

  LCVec MinvD(ng), Minv(ng);
  for (int k = 0; k < ng; ++k) {
    Minv(k) = LCplx(1.0L / static_cast<LReal>(park.M(k)));
    MinvD(k) = LCplx(static_cast<LReal>(park.D(k)) / static_cast<LReal>(park.M(k)));
  }

  LambdaEvalL ev;
  ev.resolvent_smin = smin;
  ev.Lambda = lambda * lambda * LCMat::Identity(ng, ng);
  ev.Lambda += lambda * LCMat(MinvD.asDiagonal());
  ev.Lambda += LCMat(Minv.asDiagonal()) * (Kgg - LCplx(mp) * Kgi * RKig);
  ev.Lambda_prime = LCplx(2.0L) * lambda * LCMat::Identity(ng, ng);
  ev.Lambda_prime += LCMat(MinvD.asDiagonal());
  ev.Lambda_prime += LCplx(mp) * LCMat(Minv.asDiagonal()) * Kgi * R2Kig;
  return ev;
}

}  // namespace gridform
