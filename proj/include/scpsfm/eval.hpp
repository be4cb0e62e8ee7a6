#pragma once

#include <map>
#include <string>

#include "scpsfm/factorization.hpp"
#include "scpsfm/selfcalib.hpp"

namespace scpsfm {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassificationReport {
  double precision = 0, recall = 0, f1 = 0;
  long true_positives = 0, false_positives = 0, false_negatives = 0;
};

enum class Alignment { kHomography, kSimilarity };

struct ReconstructionReport {
  double error_2d_px = 0;
  double error_3d_rel = 0;
  double focal_error_rel = 0;
  Alignment alignment_used = Alignment::kHomography;
};

/// Positive class = inlier.
ClassificationReport f1_score(const std::vector<char>& pred_mask,
                              const std::vector<char>& true_mask);

/// Per-point RMS over views of the pixel distance between reprojection and
/// observation, averaged over masked points. Degenerate projections are
/// skipped (count returned via n_skipped if given).
double error_2d(const ProjectiveReconstruction& recon,
                const CorrespondenceTracks& tracks,
                const std::vector<char>& eval_mask, int* n_skipped = nullptr);

/// Mean relative 3D error after the best class alignment from est to true.
double error_3d(const std::vector<HomPoint3>& points_est,
                const std::vector<HomPoint3>& points_true,
                const std::vector<char>& mask, Alignment alignment);

/// |f_est - f_true| / f_true with f = (fx + fy)/2.
double focal_error(const Intrinsics& K_est, const Intrinsics& K_true);

struct SweepRecord {
  std::string factor;   // swept factor name
  double value = 0;     // swept factor value
  std::string variant;  // method variant label
  int trial = 0;
  std::map<std::string, double> metrics;
};

struct SweepCell {
  std::string factor;
  double value = 0;
  std::string variant;
  int count = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // sample standard deviation
};

std::vector<SweepCell> aggregate_sweep(const std::vector<SweepRecord>& results);
std::string sweep_to_csv(const std::vector<SweepCell>& cells);

}  // namespace scpsfm
