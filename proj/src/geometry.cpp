#include "scpsfm/geometry.hpp"

#include <Eigen/SVD>

namespace scpsfm {

namespace {
void check_nonzero(double norm, const char* what) {
  if (!(norm > 0.0)) throw GeometryError(std::string(what) + ": zero vector");
}
}  // namespace

HomPoint2::HomPoint2(const Vec3& v) : coords(v) {
  check_nonzero(coords.norm(), "HomPoint2");
}

HomPoint2::HomPoint2(double x, double y, double w) : coords(x, y, w) {
  check_nonzero(coords.norm(), "HomPoint2");
}

Vec2 HomPoint2::dehomogenize() const {
  if (std::abs(coords(2)) <= kHomogeneousTol * coords.norm())
    throw GeometryError("dehomogenize: point at infinity");
  return coords.head<2>() / coords(2);
}

HomPoint3::HomPoint3(const Vec4& v) : coords(v) {
  check_nonzero(coords.norm(), "HomPoint3");
}

HomPoint3::HomPoint3(double x, double y, double z, double w) : coords(x, y, z, w) {
  check_nonzero(coords.norm(), "HomPoint3");
}

Vec3 HomPoint3::dehomogenize() const {
  if (std::abs(coords(3)) <= kHomogeneousTol * coords.norm())
    throw GeometryError("dehomogenize: point at infinity");
  return coords.head<3>() / coords(3);
}

int CameraMatrix::rank(double tol) const {
  Eigen::JacobiSVD<Mat34> svd(entries);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}

Homography4::Homography4(const Mat4& m, double det_tol) : entries(m) {
  if (std::abs(m.determinant()) <= det_tol)
    throw GeometryError("Homography4: singular matrix");
}

Homography4 Homography4::inverse() const {
  return Homography4(entries.inverse().eval());
}

HomPoint2 project_point(const CameraMatrix& P, const HomPoint3& X) {
  Vec3 v = P.entries * X.coords;
  if (v.norm() < kHomogeneousTol * X.coords.norm())
    throw GeometryError("project_point: point projects to zero (camera center)");
  return HomPoint2(v);
}

ProjectiveReconstruction apply_homography(const Homography4& H,
                                          const ProjectiveReconstruction& recon) {
  Mat4 Hinv = H.entries.inverse();
  ProjectiveReconstruction out;
  out.cameras.reserve(recon.cameras.size());
  out.points.reserve(recon.points.size());
  for (const auto& P : recon.cameras)
    out.cameras.emplace_back(Mat34(P.entries * Hinv));
  for (const auto& X : recon.points)
    out.points.emplace_back(Vec4(H.entries * X.coords));
  return out;
}

}  // namespace scpsfm
