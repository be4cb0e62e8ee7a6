#pragma once

#include "scpsfm/factorization.hpp"
#include "scpsfm/selfcalib.hpp"

namespace scpsfm {

struct SynthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SceneConfig {
  int n_views = 10;
  int m_points = 200;
  double delta = 0.0;       // outlier rate in [0, 1)
  double sigma = 0.0;       // noise as fraction of matrix RMS (0.6% -> 0.006)
  uint64_t seed = 0;
  int pad_rows = 0;         // 0 = no padding
  int pad_cols = 0;
  Intrinsics K_true = Intrinsics((Mat3() << 800, 0, 320, 0, 800, 240, 0, 0, 1).finished());
  double image_width = 640;
  double image_height = 480;

  void validate() const;
};

/// Synthetic scene with full ground truth. Tracks/depths are clean after
/// generate_scene and contaminated in place by inject_outliers.
struct GroundTruthScene {
  SceneConfig cfg;
  std::vector<CameraMatrix> cameras_metric;  // K [R|t]
  std::vector<HomPoint3> points_metric;
  DepthAssignment depths_true;
  CorrespondenceTracks tracks;
  std::vector<char> inlier_mask_true;
  Intrinsics K_true;
  PlaneAtInfinity n_inf_true;  // zero in the canonical projective frame
};

/// Per-axis rotations U[-0.4,0.4] composed z*y*x, translations U[-1,1]^3,
/// points U[-1,1]^2 x [2,4]; points with any depth <= 0.1 are resampled.
GroundTruthScene generate_scene(const SceneConfig& cfg);

/// Pairwise track exchange over a random view subset per pair; floor(delta*m)
/// tracks become outliers and are cleared in inlier_mask_true.
void inject_outliers(GroundTruthScene& scene);

/// Adds N(0, (sigma * RMS)^2) noise to every valid entry.
MeasurementMatrix add_noise(const MeasurementMatrix& M, double sigma, uint64_t seed);

MeasurementMatrix pad_matrix(const MeasurementMatrix& M, int rows, int cols);

/// Measurement matrix from the scene's (possibly contaminated) tracks and
/// ground-truth depths.
MeasurementMatrix measurement_from_scene(const GroundTruthScene& scene);

/// Full protocol: generate, contaminate, build, add noise, optionally pad.
struct SyntheticInstance {
  GroundTruthScene scene;
  MeasurementMatrix M;
};
SyntheticInstance make_instance(const SceneConfig& cfg);

/// Ground-truth reconstruction in a projective frame with P1 = [I|0] whose
/// metric upgrade parameters are exactly (K_true, n_chosen).
ProjectiveReconstruction ground_truth_projective(const GroundTruthScene& scene,
                                                 const Vec3& n_chosen = Vec3::Zero());

}  // namespace scpsfm
