#include "scpsfm/synthgen.hpp"

#include "scpsfm/rng.hpp"

namespace scpsfm {

namespace {
constexpr uint64_t kStreamScene = 1;
constexpr uint64_t kStreamOutliers = 2;
constexpr uint64_t kStreamNoise = 3;

Mat3 rot_x(double a) {
  double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << 1, 0, 0, 0, c, -s, 0, s, c;
  return R;
}
Mat3 rot_y(double a) {
  double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, 0, s, 0, 1, 0, -s, 0, c;
  return R;
}
Mat3 rot_z(double a) {
  double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}
}  // namespace

void SceneConfig::validate() const {
  if (n_views < 2) throw SynthError("SceneConfig: n_views must be >= 2");
  if (m_points < 8) throw SynthError("SceneConfig: m_points must be >= 8");
  if (delta < 0 || delta >= 1.0) throw SynthError("SceneConfig: delta must be in [0,1)");
  if (sigma < 0) throw SynthError("SceneConfig: sigma must be >= 0");
  int k = static_cast<int>(delta * m_points);
  if (k + 8 > m_points)
    throw SynthError("SceneConfig: fewer than 8 inliers would survive");
  if (pad_rows && pad_rows < 3 * n_views) throw SynthError("SceneConfig: pad_rows < 3n");
  if (pad_cols && pad_cols < m_points) throw SynthError("SceneConfig: pad_cols < m");
}

GroundTruthScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng = Rng::stream(cfg.seed, kStreamScene);
  const int n = cfg.n_views, m = cfg.m_points;

  GroundTruthScene scene;
  scene.cfg = cfg;
  scene.K_true = cfg.K_true;

  std::vector<Mat3> Rs(n);
  std::vector<Vec3> ts(n);
  for (int i = 0; i < n; ++i) {
    double ax = rng.uniform(-0.4, 0.4);
    double ay = rng.uniform(-0.4, 0.4);
    double az = rng.uniform(-0.4, 0.4);
    Rs[i] = rot_z(az) * rot_y(ay) * rot_x(ax);
    ts[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Mat34 P;
    P.leftCols<3>() = cfg.K_true.K * Rs[i];
    P.col(3) = cfg.K_true.K * ts[i];
    scene.cameras_metric.emplace_back(P);
  }

  scene.points_metric.reserve(m);
  scene.depths_true.n = n;
  scene.depths_true.m = m;
  scene.depths_true.lambdas.resize(n, m);
  scene.tracks.n = n;
  scene.tracks.m = m;
  scene.tracks.points.assign(static_cast<size_t>(n) * m, HomPoint2());

  for (int j = 0; j < m; ++j) {
    Vec3 X;
    VecX depths(n);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      X = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2, 4));
      ok = true;
      for (int i = 0; i < n; ++i) {
        depths(i) = (Rs[i] * X + ts[i]).z();
        if (depths(i) <= 0.1) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) throw SynthError("generate_scene: behind-camera resampling exhausted");
    scene.points_metric.emplace_back(X.x(), X.y(), X.z(), 1.0);
    for (int i = 0; i < n; ++i) {
      scene.depths_true.lambdas(i, j) = depths(i);
      Vec3 proj = scene.cameras_metric[i].entries * scene.points_metric[j].coords;
      scene.tracks.at(i, j) = HomPoint2(proj.x() / proj.z(), proj.y() / proj.z(), 1.0);
    }
  }
  scene.inlier_mask_true.assign(m, 1);
  return scene;
}

void inject_outliers(GroundTruthScene& scene) {
  const int n = scene.cfg.n_views, m = scene.cfg.m_points;
  const int k = static_cast<int>(scene.cfg.delta * m);
  if (k == 0) return;
  if (k < 2) throw SynthError("inject_outliers: need at least 2 exchangeable tracks");
  Rng rng = Rng::stream(scene.cfg.seed, kStreamOutliers);

  // Partial Fisher-Yates for k distinct tracks.
  std::vector<int> perm(m);
  for (int j = 0; j < m; ++j) perm[j] = j;
  for (int j = 0; j < k; ++j) {
    int r = j + static_cast<int>(rng.next_below(m - j));
    std::swap(perm[j], perm[r]);
  }

  auto swap_pair = [&](int a, int b) {
    // Exchange in a random view subset of size 1..n-1; at least one view keeps
    // the original assignment (anchor) and at least one non-first view swaps.
    int c = 1 + static_cast<int>(rng.next_below(n - 1));
    std::vector<int> views(n);
    for (int i = 0; i < n; ++i) views[i] = i;
    for (int i = 0; i < c; ++i) {
      int r = i + static_cast<int>(rng.next_below(n - i));
      std::swap(views[i], views[r]);
    }
    bool has_nonfirst = false;
    for (int i = 0; i < c; ++i)
      if (views[i] != 0) has_nonfirst = true;
    if (!has_nonfirst) views[0] = 1 + static_cast<int>(rng.next_below(n - 1));
    for (int i = 0; i < c; ++i) {
      int v = views[i];
      std::swap(scene.tracks.at(v, a), scene.tracks.at(v, b));
      std::swap(scene.depths_true.lambdas(v, a), scene.depths_true.lambdas(v, b));
    }
  };

  for (int j = 0; j + 1 < k; j += 2) swap_pair(perm[j], perm[j + 1]);
  if (k % 2 == 1) swap_pair(perm[k - 1], perm[0]);
  for (int j = 0; j < k; ++j) scene.inlier_mask_true[perm[j]] = 0;
}

MeasurementMatrix add_noise(const MeasurementMatrix& M, double sigma, uint64_t seed) {
  if (sigma < 0) throw SynthError("add_noise: sigma must be >= 0");
  if (sigma == 0) return M;
  Rng rng = Rng::stream(seed, kStreamNoise);
  MeasurementMatrix out = M;
  double sum_sq = 0;
  long count = 0;
  for (int i = 0; i < M.n_total(); ++i) {
    if (!M.row_valid[i]) continue;
    for (int j = 0; j < M.m_total(); ++j) {
      if (!M.col_valid[j]) continue;
      sum_sq += M.entries.block<3, 1>(3 * i, j).squaredNorm();
      count += 3;
    }
  }
  double scale = sigma * std::sqrt(sum_sq / std::max<long>(count, 1));
  for (int i = 0; i < M.n_total(); ++i) {
    if (!M.row_valid[i]) continue;
    for (int r = 0; r < 3; ++r)
      for (int j = 0; j < M.m_total(); ++j) {
        if (!M.col_valid[j]) continue;
        out.entries(3 * i + r, j) += scale * rng.gaussian();
      }
  }
  return out;
}

MeasurementMatrix pad_matrix(const MeasurementMatrix& M, int rows, int cols) {
  if (rows < M.entries.rows() || cols < M.entries.cols() || rows % 3 != 0)
    throw SynthError("pad_matrix: target shape too small or rows not multiple of 3");
  MeasurementMatrix out;
  out.entries = MatX::Zero(rows, cols);
  out.entries.topLeftCorner(M.entries.rows(), M.entries.cols()) = M.entries;
  out.row_valid = M.row_valid;
  out.row_valid.resize(rows / 3, 0);
  out.col_valid = M.col_valid;
  out.col_valid.resize(cols, 0);
  return out;
}

MeasurementMatrix measurement_from_scene(const GroundTruthScene& scene) {
  return build_measurement_matrix(scene.tracks, scene.depths_true);
}

SyntheticInstance make_instance(const SceneConfig& cfg) {
  SyntheticInstance inst;
  inst.scene = generate_scene(cfg);
  inject_outliers(inst.scene);
  inst.M = measurement_from_scene(inst.scene);
  inst.M = add_noise(inst.M, cfg.sigma, cfg.seed);
  if (cfg.pad_rows && cfg.pad_cols)
    inst.M = pad_matrix(inst.M, cfg.pad_rows, cfg.pad_cols);
  return inst;
}

ProjectiveReconstruction ground_truth_projective(const GroundTruthScene& scene,
                                                 const Vec3& n_chosen) {
  // Re-express the metric scene in the first camera's frame, then map it
  // through the inverse metric-upgrade homography for (K_true, n_chosen).
  const Mat34& P1 = scene.cameras_metric[0].entries;
  Mat3 K = scene.K_true.K;
  Mat3 R1 = K.inverse() * P1.leftCols<3>();
  Vec3 t1 = K.inverse() * P1.col(3);
  Mat4 S = Mat4::Identity();
  S.topLeftCorner<3, 3>() = R1;
  S.topRightCorner<3, 1>() = t1;

  ProjectiveReconstruction cam1;
  cam1.points.reserve(scene.points_metric.size());
  for (const auto& X : scene.points_metric) cam1.points.emplace_back(Vec4(S * X.coords));
  Mat4 Sinv = S.inverse();
  for (const auto& P : scene.cameras_metric)
    cam1.cameras.emplace_back(Mat34(P.entries * Sinv));

  PlaneAtInfinity n;
  n.n_inf = n_chosen;
  Homography4 Hm = metric_upgrade_homography(scene.K_true, n);
  ProjectiveReconstruction recon = apply_homography(Hm.inverse(), cam1);
  // First camera is [I|0] up to roundoff; make it exact.
  Mat34 eye;
  eye << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
  recon.cameras[0] = CameraMatrix(eye);
  return recon;
}

}  // namespace scpsfm
