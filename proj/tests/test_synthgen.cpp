#include "scpsfm/synthgen.hpp"

#include "doctest.h"
#include "scpsfm/rng.hpp"

using namespace scpsfm;

TEST_CASE("scene sampling ranges") {
  // translations and point coordinates stay in their documented boxes
  SceneConfig cfg;
  cfg.n_views = 8;
  cfg.m_points = 500;
  cfg.seed = 1;
  auto scene = generate_scene(cfg);
  for (const auto& X : scene.points_metric) {
    Vec3 p = X.dehomogenize();
    CHECK(p(0) >= -1);
    CHECK(p(0) <= 1);
    CHECK(p(1) >= -1);
    CHECK(p(1) <= 1);
    CHECK(p(2) >= 2);
    CHECK(p(2) <= 4);
  }
  // rotations: R close to identity for angles within +-0.4 per axis; check
  // orthonormality and bounded angle
  for (const auto& P : scene.cameras_metric) {
    Mat3 R = cfg.K_true.K.inverse() * P.entries.leftCols<3>();
    CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-12);
    double angle = std::acos(std::clamp((R.trace() - 1) / 2, -1.0, 1.0));
    CHECK(angle < 0.7);  // three axis angles of 0.4 compose below this bound
  }
}

TEST_CASE("depths are positive and reprojection is exact") {
  SceneConfig cfg;
  cfg.n_views = 6;
  cfg.m_points = 50;
  cfg.seed = 2;
  auto scene = generate_scene(cfg);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 50; ++j) {
      CHECK(scene.depths_true.lambdas(i, j) > 0.1);
      Vec3 proj = scene.cameras_metric[i].entries * scene.points_metric[j].coords;
      CHECK(proj(2) == doctest::Approx(scene.depths_true.lambdas(i, j)));
      Vec2 px = scene.tracks.at(i, j).dehomogenize();
      CHECK((px - Vec2(proj(0) / proj(2), proj(1) / proj(2))).norm() < 1e-12);
    }
}

TEST_CASE("determinism of generation") {
  SceneConfig cfg;
  cfg.n_views = 5;
  cfg.m_points = 40;
  cfg.delta = 0.5;
  cfg.sigma = 0.01;
  cfg.seed = 99;
  auto a = make_instance(cfg);
  auto b = make_instance(cfg);
  CHECK((a.M.entries - b.M.entries).norm() == 0.0);
  CHECK(a.scene.inlier_mask_true == b.scene.inlier_mask_true);
}

TEST_CASE("inject_outliers count and exchange structure") {
  SceneConfig cfg;
  cfg.n_views = 6;
  cfg.m_points = 100;
  cfg.delta = 0.4;
  cfg.seed = 7;
  auto scene = generate_scene(cfg);
  auto clean_tracks = scene.tracks;
  inject_outliers(scene);
  int inliers = 0;
  for (char c : scene.inlier_mask_true) inliers += c;
  CHECK(inliers == 100 - 40);
  // every outlier differs from its clean track in at least one view, and
  // every inlier is untouched
  for (int j = 0; j < 100; ++j) {
    double diff = 0;
    for (int i = 0; i < 6; ++i)
      diff += (scene.tracks.at(i, j).coords - clean_tracks.at(i, j).coords).norm();
    if (scene.inlier_mask_true[j])
      CHECK(diff == 0.0);
    else
      CHECK(diff > 0.0);
  }
}

TEST_CASE("minimal exchange of two tracks") {
  SceneConfig cfg;
  cfg.n_views = 5;
  cfg.m_points = 100;
  cfg.delta = 0.02;  // floor(0.02*100)=2
  cfg.seed = 3;
  auto scene = generate_scene(cfg);
  auto clean = scene.tracks;
  inject_outliers(scene);
  std::vector<int> changed;
  for (int j = 0; j < 100; ++j)
    if (!scene.inlier_mask_true[j]) changed.push_back(j);
  REQUIRE(changed.size() == 2);
  int a = changed[0], b = changed[1];
  int swapped_views = 0;
  for (int i = 0; i < 5; ++i) {
    bool sa = (scene.tracks.at(i, a).coords - clean.at(i, a).coords).norm() > 0;
    bool sb = (scene.tracks.at(i, b).coords - clean.at(i, b).coords).norm() > 0;
    CHECK(sa == sb);
    if (sa) {
      ++swapped_views;
      CHECK((scene.tracks.at(i, a).coords - clean.at(i, b).coords).norm() == 0.0);
      CHECK((scene.tracks.at(i, b).coords - clean.at(i, a).coords).norm() == 0.0);
    }
  }
  CHECK(swapped_views >= 1);
}

TEST_CASE("outlier tracks violate reprojection against their own 3D point") {
  SceneConfig cfg;
  cfg.n_views = 6;
  cfg.m_points = 60;
  cfg.delta = 0.3;
  cfg.seed = 5;
  auto scene = generate_scene(cfg);
  inject_outliers(scene);
  for (int j = 0; j < 60; ++j) {
    double worst = 0;
    for (int i = 0; i < 6; ++i) {
      Vec3 proj = scene.cameras_metric[i].entries * scene.points_metric[j].coords;
      Vec2 rp(proj(0) / proj(2), proj(1) / proj(2));
      worst = std::max(worst, (rp - scene.tracks.at(i, j).dehomogenize()).norm());
    }
    if (scene.inlier_mask_true[j])
      CHECK(worst < 1e-9);
    else
      CHECK(worst > 1e-8);
  }
}

TEST_CASE("add_noise statistics and invariants") {
  SceneConfig cfg;
  cfg.n_views = 10;
  cfg.m_points = 200;
  cfg.seed = 6;
  auto scene = generate_scene(cfg);
  auto M = measurement_from_scene(scene);
  CHECK((add_noise(M, 0.0, 6).entries - M.entries).norm() == 0.0);

  double sigma = 0.01;
  auto Mn = add_noise(M, sigma, 6);
  MatX D = Mn.entries - M.entries;
  double rms = std::sqrt(M.entries.squaredNorm() / M.entries.size());
  double target = sigma * rms;
  double sample_sd = std::sqrt(D.squaredNorm() / D.size());
  CHECK(std::abs(sample_sd - target) / target < 0.05);
  CHECK(std::abs(D.mean()) < 3 * target / std::sqrt(static_cast<double>(D.size())));

  // padded entries stay exactly zero
  auto Mp = pad_matrix(M, 60, 300);
  auto Mpn = add_noise(Mp, sigma, 6);
  CHECK(Mpn.entries.bottomRows(30).norm() == 0.0);
  CHECK(Mpn.entries.rightCols(100).norm() == 0.0);
}

TEST_CASE("pad_matrix shape and zero count") {
  SceneConfig cfg;
  cfg.n_views = 10;
  cfg.m_points = 200;
  cfg.seed = 8;
  auto M = measurement_from_scene(generate_scene(cfg));
  auto same = pad_matrix(M, 30, 200);
  CHECK((same.entries - M.entries).norm() == 0.0);
  auto P = pad_matrix(M, 300, 1000);
  CHECK(P.entries.rows() == 300);
  CHECK(P.entries.cols() == 1000);
  long zeros = 0;
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 1000; ++j)
      if (i >= 30 || j >= 200) {
        CHECK(P.entries(i, j) == 0.0);
        ++zeros;
      }
  CHECK(zeros == 300000 - 6000);
  CHECK(P.n_valid() == 10);
  CHECK(P.m_valid() == 200);
  CHECK((P.valid_block() - M.entries).norm() == 0.0);
}

TEST_CASE("config validation") {
  SceneConfig cfg;
  cfg.delta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), SynthError);
  cfg.delta = 0.97;
  cfg.m_points = 100;  // 97 outliers -> only 3 inliers survive
  CHECK_THROWS_AS(cfg.validate(), SynthError);
  cfg.m_points = 400;
  CHECK_NOTHROW(cfg.validate());
}
