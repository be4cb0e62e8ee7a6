#pragma once

#include "scpsfm/geometry.hpp"

namespace scpsfm {

struct SelfCalibError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Upper-triangular intrinsics with positive focal lengths, K(2,2) = 1.
struct Intrinsics {
  Mat3 K;

  Intrinsics() : K(Mat3::Identity()) {}
  explicit Intrinsics(const Mat3& k);

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double focal() const { return 0.5 * (fx() + fy()); }
};

struct PlaneAtInfinity {
  Vec3 n_inf = Vec3::Zero();
};

/// 4x4 symmetric rank-3 dual absolute quadric.
struct DualAbsoluteQuadric {
  Mat4 Q;
};

/// Frobenius-normalized symmetric positive-definite 3x3 dual image conic.
struct Diac {
  Mat3 omega;
};

struct CalibrationEstimate {
  Intrinsics K;
  PlaneAtInfinity n_inf;
  std::string frame = "pixel";  // "pixel" | "normalized"
};

/// Q = [[w, -w n], [-n^T w, n^T w n]] with w = K K^T.
DualAbsoluteQuadric daq_from_calibration(const Intrinsics& K, const PlaneAtInfinity& n);

/// Frobenius-normalized P Q P^T, sign fixed by positive trace.
Diac diac_project(const CameraMatrix& P, const DualAbsoluteQuadric& Q);

/// Eq-style residual: sum_i || P_i Q P_i^T / ||.|| - w1 / ||w1|| ||_F.
/// Views whose projection degenerates are skipped; count reported if asked.
double daq_residual(const std::vector<CameraMatrix>& cameras, const Intrinsics& K,
                    const PlaneAtInfinity& n, int* skipped = nullptr);

/// Reverse Cholesky of omega = K K^T with K upper triangular, K(2,2) = 1.
Intrinsics intrinsics_from_diac(const Diac& omega);

/// H_M = [[K^-1, 0], [n^T, 1]]; inverse is [[K, 0], [-n^T K, 1]].
Homography4 metric_upgrade_homography(const Intrinsics& K, const PlaneAtInfinity& n);

/// Applies H_M to a first-camera-normalized projective reconstruction.
ProjectiveReconstruction metric_upgrade(const ProjectiveReconstruction& recon,
                                        const Intrinsics& K, const PlaneAtInfinity& n);

}  // namespace scpsfm
