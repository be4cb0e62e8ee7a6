#pragma once

#include <array>
#include <optional>
#include <string>

#include "scpsfm/factorization.hpp"
#include "scpsfm/selfcalib.hpp"

namespace scpsfm {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Parameterization { kDirect, kEncoder };
enum class ProjLossVariant { kTailSum, kSigma4 };

struct SolverConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double t = 15.0;
  double learning_rate = 0.001;
  int max_iters = 8000;
  double inlier_threshold = 0.5;
  Parameterization parameterization = Parameterization::kDirect;
  uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  ProjLossVariant proj_loss_variant = ProjLossVariant::kTailSum;

  // Optimization schedule: the calibration terms join after phase1_frac of the
  // iterations; the weight block is re-anchored each step so the t-th largest
  // logit equals anchor_b (enforces the minimum-inlier-count constraint, which
  // the exponential penalty cannot do at realistic m — its gradient underflows).
  double phase1_frac = 0.75;
  double anchor_b = 1.0;
  // Propagate the calibration-consistency loss gradient into the weights via
  // finite differences (costly: 2m factorizations per iteration).
  bool daq_couple_weights = false;

  // Frame conventions for the intrinsics prior.
  std::string frame = "pixel";  // "pixel" | "normalized"
  double image_width = 640;
  double image_height = 480;

  double convergence_tol = 1e-8;
  int convergence_window = 100;

  void validate() const;
};

struct SolverState {
  VecX weight_logits;                       // m
  Eigen::Matrix<double, 5, 1> K_params;     // fx, fy, skew, cx, cy
  Vec3 n_inf_params;
  VecX encoder_params;                      // empty unless encoder mode
  VecX first_moment, second_moment;         // packed: logits | K | n_inf | enc
  int iteration = 0;
  std::vector<std::array<double, 3>> loss_trace;  // (L_num, a*L_proj, b*L_DAQ)

  int packed_size() const {
    return static_cast<int>(weight_logits.size()) + 8 +
           static_cast<int>(encoder_params.size());
  }
  VecX pack_params() const;
  void unpack_params(const VecX& p);
};

struct SolveResult {
  VecX soft_weights;
  std::vector<char> inlier_mask;
  CalibrationEstimate calibration;
  ProjectiveReconstruction reconstruction;       // inlier columns only
  std::vector<int> reconstruction_cols;          // source column per point
  std::vector<std::array<double, 3>> loss_trace;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  bool too_few_inliers = false;
};

/// exp(clamp(t - sum_j sigmoid(w_j - 0.5), -50, 50)).
double loss_num(const VecX& w, double t);
VecX grad_loss_num(const VecX& w, double t);  // d loss_num / d w

double loss_proj(const VecX& w, const MeasurementMatrix& M, ProjLossVariant variant);

/// Gradient of sum_{k in ks} sigma_k(M diag(w)) w.r.t. w. Degenerate singular
/// value clusters (gap <= 1e-10 sigma_1) fall back to the cluster-averaged
/// subgradient.
VecX grad_weighted_singular_values(const MatX& M, const VecX& w,
                                   const std::vector<int>& ks);
VecX grad_weighted_singular_values(const MeasurementMatrix& M, const VecX& w,
                                   const std::vector<int>& ks);

/// Factorizes M diag(w) (rank-4 projection, Sturm/Triggs, first-camera
/// normalization) and returns the calibration-consistency residual. A
/// degenerate factorization yields the capped constant 1e3 and sets the flag.
double loss_daq(const VecX& w, const MeasurementMatrix& M, const Intrinsics& K,
                const PlaneAtInfinity& n, bool* degenerate_flag = nullptr);

struct LossComponents {
  double num = 0, proj = 0, daq = 0;
  double total() const { return num + proj + daq; }  // already alpha/beta scaled
};
LossComponents loss_total(const SolverState& state, const MeasurementMatrix& M,
                          const SolverConfig& cfg);

/// Packed gradient (logits | K_params | n_inf | encoder). L_num and L_proj are
/// analytic; the calibration term uses central finite differences.
VecX grad_total(const SolverState& state, const MeasurementMatrix& M,
                const SolverConfig& cfg);

/// Standard Adam with bias correction over the packed parameter vector.
void adam_step(SolverState& state, const VecX& grad, const SolverConfig& cfg);

SolverState init_state(const MeasurementMatrix& M, const SolverConfig& cfg);

SolveResult solve(const MeasurementMatrix& M, const SolverConfig& cfg);

}  // namespace scpsfm
