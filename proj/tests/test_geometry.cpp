#include "scpsfm/geometry.hpp"

#include "doctest.h"
#include "scpsfm/rng.hpp"

using namespace scpsfm;

TEST_CASE("project_point canonical camera") {
  CameraMatrix P;  // [I|0]
  HomPoint3 X(1, 2, 3, 1);
  HomPoint2 x = project_point(P, X);
  CHECK(x.coords(0) == doctest::Approx(1));
  CHECK(x.coords(1) == doctest::Approx(2));
  CHECK(x.coords(2) == doctest::Approx(3));
  Vec2 px = x.dehomogenize();
  CHECK(px(0) == doctest::Approx(1.0 / 3));
  CHECK(px(1) == doctest::Approx(2.0 / 3));
}

TEST_CASE("project_point at camera center throws") {
  CameraMatrix P;
  CHECK_THROWS_AS(project_point(P, HomPoint3(0, 0, 0, 1)), GeometryError);
}

TEST_CASE("project_point matches brute-force multiply oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Mat34 Pm;
    Vec4 Xv;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) Pm(i, j) = rng.uniform(-2, 2);
    for (int j = 0; j < 4; ++j) Xv(j) = rng.uniform(-2, 2);
    if ((Pm * Xv).norm() < 1e-6) continue;
    HomPoint2 got = project_point(CameraMatrix(Pm), HomPoint3(Xv));
    // independent element-wise loop
    for (int i = 0; i < 3; ++i) {
      double acc = 0;
      for (int j = 0; j < 4; ++j) acc += Pm(i, j) * Xv(j);
      CHECK(got.coords(i) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("projective scale invariance of project_point") {
  Rng rng(7);
  Mat34 Pm;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) Pm(i, j) = rng.uniform(-1, 1);
  CameraMatrix P(Pm);
  HomPoint3 X(0.3, -0.7, 1.1, 1.0);
  HomPoint3 Xs(Vec4(3.7 * X.coords));
  CHECK(projectively_equal(project_point(P, X).coords, project_point(P, Xs).coords));
}

TEST_CASE("dehomogenize") {
  CHECK(HomPoint2(2, 4, 2).dehomogenize()(0) == doctest::Approx(1));
  CHECK(HomPoint2(2, 4, 2).dehomogenize()(1) == doctest::Approx(2));
  CHECK_THROWS_AS(HomPoint2(1, 1, 0).dehomogenize(), GeometryError);
  Vec3 p = HomPoint3(3, 6, 9, 3).dehomogenize();
  CHECK(p(0) == doctest::Approx(1));
  CHECK(p(1) == doctest::Approx(2));
  CHECK(p(2) == doctest::Approx(3));
}

namespace {
ProjectiveReconstruction random_recon(uint64_t seed, int n, int m) {
  Rng rng(seed);
  ProjectiveReconstruction r;
  for (int i = 0; i < n; ++i) {
    Mat34 P;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 4; ++b) P(a, b) = rng.uniform(-1, 1);
    r.cameras.emplace_back(P);
  }
  for (int j = 0; j < m; ++j)
    r.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3),
                          1.0);
  return r;
}

Mat4 random_nonsingular(uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    Mat4 H;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) H(a, b) = rng.uniform(-1, 1);
    if (std::abs(H.determinant()) > 0.05) return H;
  }
}
}  // namespace

TEST_CASE("apply_homography identity and scale") {
  auto r = random_recon(1, 3, 5);
  auto same = apply_homography(Homography4(), r);
  for (int i = 0; i < 3; ++i)
    CHECK((same.cameras[i].entries - r.cameras[i].entries).norm() < 1e-12);
  auto scaled = apply_homography(Homography4(Mat4(2 * Mat4::Identity())), r);
  for (int j = 0; j < 5; ++j)
    CHECK(projectively_equal(project_point(scaled.cameras[0], scaled.points[j]).coords,
                             project_point(r.cameras[0], r.points[j]).coords));
}

TEST_CASE("apply_homography preserves projections (cross-product oracle)") {
  auto r = random_recon(2, 3, 5);
  Homography4 H(random_nonsingular(3));
  auto r2 = apply_homography(H, r);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      Vec3 orig = project_point(r.cameras[i], r.points[j]).coords;
      Vec3 moved = project_point(r2.cameras[i], r2.points[j]).coords;
      CHECK(orig.cross(moved).norm() < 1e-9 * orig.norm() * moved.norm());
    }
}

TEST_CASE("homography composition and inverse round trip") {
  auto r = random_recon(4, 2, 4);
  Homography4 H1(random_nonsingular(5)), H2(random_nonsingular(6));
  auto a = apply_homography(H2, apply_homography(H1, r));
  auto b = apply_homography(Homography4(Mat4(H2.entries * H1.entries)), r);
  for (int i = 0; i < 2; ++i)
    CHECK(projectively_equal(MatX(a.cameras[i].entries), MatX(b.cameras[i].entries)));
  for (int j = 0; j < 4; ++j)
    CHECK(projectively_equal(a.points[j].coords, b.points[j].coords));

  auto rt = apply_homography(H1.inverse(), apply_homography(H1, r));
  for (int i = 0; i < 2; ++i)
    CHECK(projectively_equal(MatX(rt.cameras[i].entries), MatX(r.cameras[i].entries)));
  for (int j = 0; j < 4; ++j)
    CHECK(projectively_equal(rt.points[j].coords, r.points[j].coords));
}

TEST_CASE("singular homography rejected") {
  Mat4 H = Mat4::Identity();
  H(3, 3) = 0;
  CHECK_THROWS_AS(Homography4{H}, GeometryError);
}

TEST_CASE("camera rank") {
  CHECK(CameraMatrix().rank() == 3);
  Mat34 P = Mat34::Zero();
  P.row(0) << 1, 0, 0, 0;
  P.row(1) << 2, 0, 0, 0;
  P.row(2) << 3, 0, 0, 0;
  CHECK(CameraMatrix(P).rank() == 1);
}
