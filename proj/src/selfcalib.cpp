#include "scpsfm/selfcalib.hpp"

#include <Eigen/Cholesky>

namespace scpsfm {

Intrinsics::Intrinsics(const Mat3& k) : K(k) {
  if (!(K(0, 0) > 0) || !(K(1, 1) > 0))
    throw SelfCalibError("Intrinsics: focal lengths must be positive");
  if (std::abs(K(1, 0)) > 1e-12 || std::abs(K(2, 0)) > 1e-12 ||
      std::abs(K(2, 1)) > 1e-12)
    throw SelfCalibError("Intrinsics: matrix not upper triangular");
  if (std::abs(K(2, 2)) < 1e-15)
    throw SelfCalibError("Intrinsics: K(2,2) must be nonzero");
  K /= K(2, 2);
}

DualAbsoluteQuadric daq_from_calibration(const Intrinsics& K,
                                         const PlaneAtInfinity& n) {
  Mat3 w = K.K * K.K.transpose();
  Vec3 wn = w * n.n_inf;
  Mat4 Q;
  Q.topLeftCorner<3, 3>() = w;
  Q.topRightCorner<3, 1>() = -wn;
  Q.bottomLeftCorner<1, 3>() = -wn.transpose();
  Q(3, 3) = n.n_inf.dot(wn);
  return DualAbsoluteQuadric{Q};
}

Diac diac_project(const CameraMatrix& P, const DualAbsoluteQuadric& Q) {
  Mat3 w = P.entries * Q.Q * P.entries.transpose();
  double nrm = w.norm();
  if (nrm < 1e-12)
    throw SelfCalibError("diac_project: degenerate projection");
  w /= nrm;
  if (w.trace() < 0) w = -w;
  return Diac{w};
}

double daq_residual(const std::vector<CameraMatrix>& cameras, const Intrinsics& K,
                    const PlaneAtInfinity& n, int* skipped) {
  DualAbsoluteQuadric Q = daq_from_calibration(K, n);
  Mat3 w1 = K.K * K.K.transpose();
  w1 /= w1.norm();
  double eta = 0;
  int skip = 0;
  for (const auto& P : cameras) {
    try {
      Diac wi = diac_project(P, Q);
      eta += (wi.omega - w1).norm();
    } catch (const SelfCalibError&) {
      ++skip;
    }
  }
  if (skipped) *skipped = skip;
  return eta;
}

Intrinsics intrinsics_from_diac(const Diac& omega) {
  // Reverse Cholesky: exchange-permute, LL^T-factor, permute back.
  Mat3 E = Mat3::Zero();
  E(0, 2) = E(1, 1) = E(2, 0) = 1;
  Mat3 rev = E * omega.omega * E;
  Eigen::LLT<Mat3> llt(rev);
  if (llt.info() != Eigen::Success)
    throw SelfCalibError("intrinsics_from_diac: omega not positive definite");
  Mat3 L = llt.matrixL();
  Mat3 K = E * L * E;  // upper triangular with positive diagonal
  return Intrinsics(K);
}

Homography4 metric_upgrade_homography(const Intrinsics& K, const PlaneAtInfinity& n) {
  Mat4 H = Mat4::Identity();
  H.topLeftCorner<3, 3>() = K.K.inverse();
  H.bottomLeftCorner<1, 3>() = n.n_inf.transpose();
  return Homography4(H);
}

ProjectiveReconstruction metric_upgrade(const ProjectiveReconstruction& recon,
                                        const Intrinsics& K, const PlaneAtInfinity& n) {
  return apply_homography(metric_upgrade_homography(K, n), recon);
}

}  // namespace scpsfm
