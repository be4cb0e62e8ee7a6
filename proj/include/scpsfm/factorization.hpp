#pragma once

#include <vector>

#include "scpsfm/geometry.hpp"

namespace scpsfm {

struct FactorizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// n views x m tracks of image points, full visibility assumed.
struct CorrespondenceTracks {
  int n = 0;
  int m = 0;
  std::vector<HomPoint2> points;  // row-major: view i, track j at i*m + j

  HomPoint2& at(int i, int j) { return points[static_cast<size_t>(i) * m + j]; }
  const HomPoint2& at(int i, int j) const {
    return points[static_cast<size_t>(i) * m + j];
  }
};

/// Projective depths, one per (view, track). Tracks whose depth propagation
/// degenerated are flagged for exclusion.
struct DepthAssignment {
  int n = 0;
  int m = 0;
  MatX lambdas;                    // n x m
  std::vector<char> degenerate;    // per-track flag, empty means none
};

enum class DepthStrategy { kUnit, kGroundTruth, kFundamentalChain };

/// 3n x m stack of depth-scaled homogeneous points, optionally zero-padded.
/// row_valid has one flag per 3-row view block.
struct MeasurementMatrix {
  MatX entries;
  std::vector<char> row_valid;  // size entries.rows()/3
  std::vector<char> col_valid;  // size entries.cols()

  int n_total() const { return static_cast<int>(entries.rows()) / 3; }
  int m_total() const { return static_cast<int>(entries.cols()); }
  int n_valid() const;
  int m_valid() const;
  /// Compacted 3*n_valid x m_valid block of the valid rows/columns.
  MatX valid_block() const;
  std::vector<int> valid_view_indices() const;
  std::vector<int> valid_col_indices() const;

  static MeasurementMatrix from_dense(const MatX& entries);
};

struct FundamentalMatrix {
  Mat3 entries;  // rank 2, unit Frobenius norm
};

MeasurementMatrix build_measurement_matrix(const CorrespondenceTracks& tracks,
                                           const DepthAssignment& depths);

/// Hartley-normalized eight-point algorithm; rank-2 enforced, ||F||_F = 1.
/// Satisfies x_b' F x_a = 0 for correspondences (x_a in view a, x_b in view b).
FundamentalMatrix estimate_fundamental(const std::vector<HomPoint2>& pts_a,
                                       const std::vector<HomPoint2>& pts_b);

/// Left null vector e' with F^T e' = 0 (epipole in the second view), unit norm.
HomPoint2 epipole(const FundamentalMatrix& F);

DepthAssignment estimate_depths(const CorrespondenceTracks& tracks,
                                DepthStrategy strategy,
                                const DepthAssignment* ground_truth = nullptr);

/// Frobenius-nearest rank-<=4 matrix on the valid block; padding untouched.
MeasurementMatrix rank4_project(const MeasurementMatrix& M);

/// P = U4 * sqrt(D4), X = sqrt(D4) * V4^T on the valid block.
/// Sign convention: largest-|.| entry of each left singular vector positive.
ProjectiveReconstruction sturm_triggs_factorize(const MeasurementMatrix& M);

/// Transforms the reconstruction so the first camera is exactly [I|0].
ProjectiveReconstruction normalize_first_camera(const ProjectiveReconstruction& recon);

/// ||(M - P*X) * diag(w)||_F on the valid block.
double weighted_reprojection_residual(const MeasurementMatrix& M,
                                      const ProjectiveReconstruction& recon,
                                      const VecX& w);

}  // namespace scpsfm
