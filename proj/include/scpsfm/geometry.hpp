#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace scpsfm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Relative tolerance for treating a homogeneous last coordinate as zero.
inline constexpr double kHomogeneousTol = 1e-12;
// Tolerance for projective-equality comparisons of normalized vectors.
inline constexpr double kProjectiveEqTol = 1e-9;

/// Homogeneous 2D image point (3-vector, never the zero vector).
struct HomPoint2 {
  Vec3 coords;

  HomPoint2() : coords(0, 0, 1) {}
  explicit HomPoint2(const Vec3& v);
  HomPoint2(double x, double y, double w);

  Vec2 dehomogenize() const;
};

/// Homogeneous 3D point (4-vector, never the zero vector).
struct HomPoint3 {
  Vec4 coords;

  HomPoint3() : coords(0, 0, 0, 1) {}
  explicit HomPoint3(const Vec4& v);
  HomPoint3(double x, double y, double z, double w);

  Vec3 dehomogenize() const;
};

/// 3x4 projection matrix with full row rank.
struct CameraMatrix {
  Mat34 entries;

  CameraMatrix() { entries << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0; }
  explicit CameraMatrix(const Mat34& m) : entries(m) {}

  int rank(double tol = 1e-12) const;
};

/// Nonsingular 4x4 projective transform of space.
struct Homography4 {
  Mat4 entries;

  Homography4() : entries(Mat4::Identity()) {}
  explicit Homography4(const Mat4& m, double det_tol = 1e-12);

  Homography4 inverse() const;
};

struct ProjectiveReconstruction {
  std::vector<CameraMatrix> cameras;
  std::vector<HomPoint3> points;
};

HomPoint2 project_point(const CameraMatrix& P, const HomPoint3& X);

/// Cameras map to P*H^-1, points to H*X; image projections are preserved.
ProjectiveReconstruction apply_homography(const Homography4& H,
                                          const ProjectiveReconstruction& recon);

/// True iff a and b are equal up to a nonzero scalar factor (entries compared
/// after normalization, sign resolved by dot product).
template <typename DerivedA, typename DerivedB>
bool projectively_equal(const Eigen::MatrixBase<DerivedA>& a,
                        const Eigen::MatrixBase<DerivedB>& b,
                        double tol = kProjectiveEqTol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  MatX ac = a, bc = b;
  Eigen::Map<const VecX> av(ac.data(), ac.size()), bv(bc.data(), bc.size());
  double na = av.norm(), nb = bv.norm();
  if (na == 0.0 || nb == 0.0) return false;
  VecX an = av / na, bn = bv / nb;
  if (an.dot(bn) < 0) bn = -bn;
  return (an - bn).norm() < tol;
}

}  // namespace scpsfm
