#include "scpsfm/solver.hpp"

#include <algorithm>

#include "scpsfm/encoder.hpp"
#include "scpsfm/parallel.hpp"

namespace scpsfm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Intrinsics intrinsics_from_params(const Eigen::Matrix<double, 5, 1>& p) {
  Mat3 K;
  K << p(0), p(2), p(3), 0, p(1), p(4), 0, 0, 1;
  return Intrinsics(K);
}

std::vector<int> variant_indices(ProjLossVariant variant, int rank_bound) {
  std::vector<int> ks;
  if (variant == ProjLossVariant::kSigma4) {
    if (rank_bound > 3) ks.push_back(3);
  } else {
    for (int k = 4; k < rank_bound; ++k) ks.push_back(k);
  }
  return ks;
}

// K0-normalized copy of the valid block (each view premultiplied by K0^-1).
MatX normalized_block(const MatX& B, const Mat3& K0inv) {
  MatX Mc = B;
  for (int i = 0; i < B.rows() / 3; ++i)
    Mc.middleRows(3 * i, 3) = K0inv * B.middleRows(3 * i, 3);
  return Mc;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(alpha > 0)) throw SolverError("SolverConfig: alpha must be > 0");
  if (beta < 0) throw SolverError("SolverConfig: beta must be >= 0");
  if (!(learning_rate > 0)) throw SolverError("SolverConfig: learning_rate must be > 0");
  if (max_iters < 1) throw SolverError("SolverConfig: max_iters must be >= 1");
  if (!(inlier_threshold > 0 && inlier_threshold < 1))
    throw SolverError("SolverConfig: inlier_threshold must be in (0,1)");
  if (phase1_frac < 0 || phase1_frac > 1)
    throw SolverError("SolverConfig: phase1_frac must be in [0,1]");
  if (frame != "pixel" && frame != "normalized")
    throw SolverError("SolverConfig: frame must be 'pixel' or 'normalized'");
}

VecX SolverState::pack_params() const {
  VecX p(packed_size());
  p.head(weight_logits.size()) = weight_logits;
  p.segment(weight_logits.size(), 5) = K_params;
  p.segment(weight_logits.size() + 5, 3) = n_inf_params;
  if (encoder_params.size()) p.tail(encoder_params.size()) = encoder_params;
  return p;
}

void SolverState::unpack_params(const VecX& p) {
  weight_logits = p.head(weight_logits.size());
  K_params = p.segment(weight_logits.size(), 5);
  n_inf_params = p.segment(weight_logits.size() + 5, 3);
  if (encoder_params.size()) encoder_params = p.tail(encoder_params.size());
}

double loss_num(const VecX& w, double t) {
  double s = 0;
  for (int j = 0; j < w.size(); ++j) s += sigmoid(w(j) - 0.5);
  return std::exp(std::clamp(t - s, -50.0, 50.0));
}

VecX grad_loss_num(const VecX& w, double t) {
  double L = loss_num(w, t);
  VecX g(w.size());
  for (int j = 0; j < w.size(); ++j) {
    double s = sigmoid(w(j) - 0.5);
    g(j) = -L * s * (1 - s);
  }
  return g;
}

double loss_proj(const VecX& w, const MeasurementMatrix& M, ProjLossVariant variant) {
  MatX B = M.valid_block();
  if (w.size() != B.cols()) throw SolverError("loss_proj: weight size mismatch");
  int r = static_cast<int>(std::min(B.rows(), B.cols()));
  if (variant == ProjLossVariant::kTailSum && r < 5)
    throw SolverError("loss_proj: tail_sum needs min dimension >= 5");
  if (variant == ProjLossVariant::kSigma4 && r < 4)
    throw SolverError("loss_proj: sigma4 needs min dimension >= 4");
  MatX A = B * w.asDiagonal();
  Eigen::BDCSVD<MatX> svd(A);
  const VecX& s = svd.singularValues();
  if (variant == ProjLossVariant::kSigma4) return s(3);
  return s.tail(r - 4).sum();
}

VecX grad_weighted_singular_values(const MatX& M, const VecX& w,
                                   const std::vector<int>& ks) {
  const int m = static_cast<int>(M.cols());
  if (w.size() != m) throw SolverError("grad_weighted_singular_values: size mismatch");
  MatX A = M * w.asDiagonal();
  Eigen::BDCSVD<MatX> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX& s = svd.singularValues();
  const int r = static_cast<int>(s.size());

  // Cluster fractions: near-equal singular values share their subgradient.
  std::vector<double> frac(r, 0.0);
  std::vector<char> requested(r, 0);
  for (int k : ks)
    if (k >= 0 && k < r) requested[k] = 1;
  double gap_tol = 1e-10 * (r > 0 ? s(0) : 0.0);
  int a = 0;
  while (a < r) {
    int b = a;
    while (b + 1 < r && s(b) - s(b + 1) <= gap_tol) ++b;
    int in_cluster = 0;
    for (int i = a; i <= b; ++i) in_cluster += requested[i];
    double f = static_cast<double>(in_cluster) / (b - a + 1);
    for (int i = a; i <= b; ++i) frac[i] = f;
    a = b + 1;
  }

  // d sigma_k / d w_j = (u_k^T m_j) * v_k(j); G = M^T U gives the first factor.
  MatX G = M.transpose() * svd.matrixU();
  const MatX& V = svd.matrixV();
  VecX grad = VecX::Zero(m);
  for (int i = 0; i < r; ++i) {
    if (frac[i] == 0.0) continue;
    grad += frac[i] * G.col(i).cwiseProduct(V.col(i));
  }
  return grad;
}

VecX grad_weighted_singular_values(const MeasurementMatrix& M, const VecX& w,
                                   const std::vector<int>& ks) {
  return grad_weighted_singular_values(M.valid_block(), w, ks);
}

double loss_daq(const VecX& w, const MeasurementMatrix& M, const Intrinsics& K,
                const PlaneAtInfinity& n, bool* degenerate_flag) {
  if (degenerate_flag) *degenerate_flag = false;
  MatX B = M.valid_block();
  if (w.size() != B.cols()) throw SolverError("loss_daq: weight size mismatch");
  try {
    MeasurementMatrix Mw = MeasurementMatrix::from_dense(B * w.asDiagonal());
    ProjectiveReconstruction recon = sturm_triggs_factorize(Mw);
    recon = normalize_first_camera(recon);
    return daq_residual(recon.cameras, K, n);
  } catch (const std::runtime_error&) {
    if (degenerate_flag) *degenerate_flag = true;
    return 1e3;  // capped so early optimization with bad weights survives
  }
}

LossComponents loss_total(const SolverState& state, const MeasurementMatrix& M,
                          const SolverConfig& cfg) {
  VecX logits = state.weight_logits;
  Vec3 n_inf = state.n_inf_params;
  if (cfg.parameterization == Parameterization::kEncoder) {
    Encoder enc(3 * M.n_valid());
    VecX lg;
    enc.forward(M.valid_block(), state.encoder_params, lg, n_inf);
    logits = lg;
  }
  VecX w = logits.unaryExpr([](double x) { return sigmoid(x); });
  LossComponents c;
  c.num = loss_num(w, cfg.t);
  c.proj = cfg.alpha * loss_proj(w, M, cfg.proj_loss_variant);
  if (cfg.beta > 0) {
    PlaneAtInfinity n;
    n.n_inf = n_inf;
    c.daq = cfg.beta * loss_daq(w, M, intrinsics_from_params(state.K_params), n);
  }
  return c;
}

VecX grad_total(const SolverState& state, const MeasurementMatrix& M,
                const SolverConfig& cfg) {
  const int m = static_cast<int>(state.weight_logits.size());
  MatX B = M.valid_block();
  int r = static_cast<int>(std::min(B.rows(), B.cols()));

  VecX logits = state.weight_logits;
  Vec3 n_inf = state.n_inf_params;
  Encoder enc(3 * M.n_valid());
  Encoder::Cache cache;
  const bool encoder_mode = cfg.parameterization == Parameterization::kEncoder;
  if (encoder_mode) {
    VecX lg;
    enc.forward(B, state.encoder_params, lg, n_inf, &cache);
    logits = lg;
  }
  VecX w = logits.unaryExpr([](double x) { return sigmoid(x); });

  VecX dw = grad_loss_num(w, cfg.t) +
            cfg.alpha * grad_weighted_singular_values(
                            B, w, variant_indices(cfg.proj_loss_variant, r));
  Intrinsics K = intrinsics_from_params(state.K_params);
  PlaneAtInfinity n;
  n.n_inf = n_inf;
  if (cfg.beta > 0 && cfg.daq_couple_weights)
    dw += cfg.beta * daq_weight_gradient_fd_parallel(M, w, K, n);

  VecX dlogits = dw.cwiseProduct(w.cwiseProduct(VecX::Ones(m) - w));

  VecX grad = VecX::Zero(state.packed_size());
  const double step = 1e-5;
  Eigen::Matrix<double, 5, 1> dK = Eigen::Matrix<double, 5, 1>::Zero();
  Vec3 dn = Vec3::Zero();
  if (cfg.beta > 0) {
    for (int i = 0; i < 5; ++i) {
      auto Kp = state.K_params, Km = state.K_params;
      double h = step * std::max(1.0, std::abs(state.K_params(i)));
      Kp(i) += h;
      Km(i) -= h;
      dK(i) = cfg.beta *
              (loss_daq(w, M, intrinsics_from_params(Kp), n) -
               loss_daq(w, M, intrinsics_from_params(Km), n)) /
              (2 * h);
    }
    for (int i = 0; i < 3; ++i) {
      PlaneAtInfinity np = n, nm = n;
      double h = step * std::max(1.0, std::abs(n.n_inf(i)));
      np.n_inf(i) += h;
      nm.n_inf(i) -= h;
      dn(i) = cfg.beta * (loss_daq(w, M, K, np) - loss_daq(w, M, K, nm)) / (2 * h);
    }
  }

  if (encoder_mode) {
    grad.segment(m, 5) = dK;
    grad.tail(state.encoder_params.size()) =
        enc.backward(B, state.encoder_params, cache, dlogits, dn);
  } else {
    grad.head(m) = dlogits;
    grad.segment(m, 5) = dK;
    grad.segment(m + 5, 3) = dn;
  }
  return grad;
}

void adam_step(SolverState& state, const VecX& grad, const SolverConfig& cfg) {
  if (grad.size() != state.packed_size())
    throw SolverError("adam_step: gradient shape mismatch");
  if (state.first_moment.size() != grad.size()) {
    state.first_moment = VecX::Zero(grad.size());
    state.second_moment = VecX::Zero(grad.size());
  }
  state.iteration += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  state.first_moment = b1 * state.first_moment + (1 - b1) * grad;
  state.second_moment =
      b2 * state.second_moment + (1 - b2) * grad.cwiseProduct(grad);
  double c1 = 1 - std::pow(b1, state.iteration);
  double c2 = 1 - std::pow(b2, state.iteration);
  VecX mhat = state.first_moment / c1;
  VecX vhat = state.second_moment / c2;
  VecX p = state.pack_params();
  p -= cfg.learning_rate *
       mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                          VecX::Constant(grad.size(), cfg.adam_eps));
  state.unpack_params(p);
}

SolverState init_state(const MeasurementMatrix& M, const SolverConfig& cfg) {
  SolverState st;
  const int m = M.m_valid();
  st.weight_logits = VecX::Zero(m);
  double f0 = 1.0, cx = 0.0, cy = 0.0;
  if (cfg.frame == "pixel") {
    f0 = 1.2 * std::max(cfg.image_width, cfg.image_height);
    cx = cfg.image_width / 2;
    cy = cfg.image_height / 2;
  }
  st.K_params << f0, f0, 0, cx, cy;
  st.n_inf_params.setZero();
  if (cfg.parameterization == Parameterization::kEncoder) {
    Encoder enc(3 * M.n_valid());
    st.encoder_params = enc.init_params(cfg.seed);
  }
  st.first_moment = VecX::Zero(st.packed_size());
  st.second_moment = VecX::Zero(st.packed_size());
  return st;
}

namespace {

// Generic loop over the packed spec-level objective (used by encoder mode).
SolveResult solve_generic(const MeasurementMatrix& M, const SolverConfig& cfg,
                          SolverState& st) {
  SolveResult res;
  double prev_window_loss = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    VecX g = grad_total(st, M, cfg);
    adam_step(st, g, cfg);
    LossComponents c = loss_total(st, M, cfg);
    st.loss_trace.push_back({c.num, c.proj, c.daq});
    if (it % cfg.convergence_window == 0) {
      double L = c.total();
      if (std::abs(prev_window_loss - L) <
          cfg.convergence_tol * std::max(std::abs(L), 1.0)) {
        res.converged = true;
        res.iterations = it;
        break;
      }
      prev_window_loss = L;
    }
    res.iterations = it;
  }
  VecX logits = st.weight_logits;
  Vec3 n_inf = st.n_inf_params;
  if (cfg.parameterization == Parameterization::kEncoder) {
    Encoder enc(3 * M.n_valid());
    enc.forward(M.valid_block(), st.encoder_params, logits, n_inf);
    st.n_inf_params = n_inf;
  }
  res.soft_weights = logits.unaryExpr([](double x) { return sigmoid(x); });
  res.calibration.K = intrinsics_from_params(st.K_params);
  res.calibration.n_inf.n_inf = n_inf;
  res.calibration.frame = cfg.frame;
  return res;
}

// Direct parameterization with the validated schedule: raw-frame projection
// loss, block-shared Adam second moment on the logits, per-iteration anchor
// of the t-th largest logit, and a late phase for the calibration parameters
// evaluated on the prior-normalized frame.
SolveResult solve_direct(const MeasurementMatrix& M, const SolverConfig& cfg,
                         SolverState& st) {
  SolveResult res;
  MatX B = M.valid_block();
  const int m = static_cast<int>(B.cols());
  const int r = static_cast<int>(std::min(B.rows(), B.cols()));
  const std::vector<int> ks = variant_indices(cfg.proj_loss_variant, r);

  double f0 = 1.0, c0x = 0.0, c0y = 0.0;
  if (cfg.frame == "pixel") {
    f0 = 1.2 * std::max(cfg.image_width, cfg.image_height);
    c0x = cfg.image_width / 2;
    c0y = cfg.image_height / 2;
  }
  Mat3 K0;
  K0 << f0, 0, c0x, 0, f0, c0y, 0, 0, 1;
  MatX Mc = normalized_block(B, K0.inverse());
  MeasurementMatrix Mc_mm = MeasurementMatrix::from_dense(Mc);
  MeasurementMatrix B_mm = MeasurementMatrix::from_dense(B);

  const int kth = std::max(
      0, std::min(static_cast<int>(std::llround(cfg.t)), m) - 1);
  const int phase1 = static_cast<int>(cfg.phase1_frac * cfg.max_iters);

  VecX logits = st.weight_logits;
  // Anchor the initial logits too (t-th largest -> anchor_b; all equal here).
  logits.array() += cfg.anchor_b - logits(kth);

  // Internal calibration parameters on the normalized frame:
  // K_norm = [[exp(k0), k2, k3], [0, exp(k1), k4], [0,0,1]].
  Eigen::Matrix<double, 5, 1> kp = Eigen::Matrix<double, 5, 1>::Zero();
  Vec3 ninf = Vec3::Zero();

  VecX mom = VecX::Zero(m), vel = VecX::Zero(m);
  Eigen::Matrix<double, 8, 1> mom_c = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 1> vel_c = Eigen::Matrix<double, 8, 1>::Zero();
  int cal_t = 0;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2, eps = cfg.adam_eps;

  auto k_norm = [&](const Eigen::Matrix<double, 5, 1>& p) {
    Mat3 K;
    K << std::exp(p(0)), p(2), p(3), 0, std::exp(p(1)), p(4), 0, 0, 1;
    return Intrinsics(K);
  };

  double prev_window_loss = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    VecX w = logits.unaryExpr([](double x) { return sigmoid(x); });

    Eigen::BDCSVD<MatX> svd(B * w.asDiagonal(),
                            Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VecX& s = svd.singularValues();
    double lproj = cfg.proj_loss_variant == ProjLossVariant::kSigma4
                       ? s(3)
                       : s.tail(r - 4).sum();
    double lnum = loss_num(w, cfg.t);

    // Analytic d(alpha*lproj + lnum)/dw, then chain through the sigmoid.
    MatX G = B.transpose() * svd.matrixU();
    const MatX& V = svd.matrixV();
    VecX dw = grad_loss_num(w, cfg.t);
    for (int k : ks) dw += cfg.alpha * G.col(k).cwiseProduct(V.col(k));

    double ldaq = 0;
    const bool use_daq = cfg.beta > 0 && it > phase1;
    if (use_daq) {
      Intrinsics Ki = k_norm(kp);
      PlaneAtInfinity np;
      np.n_inf = ninf;
      bool degen = false;
      ldaq = loss_daq(w, Mc_mm, Ki, np, &degen);
      if (degen) res.degenerate = true;

      Eigen::Matrix<double, 8, 1> gc;
      const double step = 1e-5;
      for (int i = 0; i < 5; ++i) {
        auto pp = kp, pm = kp;
        pp(i) += step;
        pm(i) -= step;
        gc(i) = cfg.beta *
                (loss_daq(w, Mc_mm, k_norm(pp), np) -
                 loss_daq(w, Mc_mm, k_norm(pm), np)) /
                (2 * step);
      }
      for (int i = 0; i < 3; ++i) {
        PlaneAtInfinity npp = np, npm = np;
        npp.n_inf(i) += step;
        npm.n_inf(i) -= step;
        gc(5 + i) = cfg.beta *
                    (loss_daq(w, Mc_mm, Ki, npp) - loss_daq(w, Mc_mm, Ki, npm)) /
                    (2 * step);
      }
      if (cfg.daq_couple_weights)
        dw += cfg.beta * daq_weight_gradient_fd_parallel(Mc_mm, w, Ki, np);

      ++cal_t;
      mom_c = b1 * mom_c + (1 - b1) * gc;
      vel_c = b2 * vel_c + (1 - b2) * gc.cwiseProduct(gc);
      auto mh = mom_c / (1 - std::pow(b1, cal_t));
      auto vh = vel_c / (1 - std::pow(b2, cal_t));
      Eigen::Matrix<double, 8, 1> upd =
          cfg.learning_rate *
          mh.cwiseQuotient((vh.cwiseSqrt().array() + eps).matrix());
      kp -= upd.head<5>();
      ninf -= upd.tail<3>();
    }

    VecX dlogits = dw.cwiseProduct(w.cwiseProduct(VecX::Ones(m) - w));

    // Adam with a block-shared second moment: per-coordinate normalization
    // would equalize update magnitudes and erase the inlier/outlier signal.
    mom = b1 * mom + (1 - b1) * dlogits;
    vel = b2 * vel + (1 - b2) * dlogits.cwiseProduct(dlogits);
    double c1 = 1 - std::pow(b1, it), c2 = 1 - std::pow(b2, it);
    double denom = std::sqrt((vel / c2).mean()) + eps;
    logits -= cfg.learning_rate * (mom / c1) / denom;

    // Gauge: pin the t-th largest logit at anchor_b, then clamp.
    VecX sorted = logits;
    std::nth_element(sorted.data(), sorted.data() + kth,
                     sorted.data() + sorted.size(), std::greater<double>());
    logits.array() += cfg.anchor_b - sorted(kth);
    logits = logits.cwiseMax(-30.0).cwiseMin(30.0);

    st.loss_trace.push_back({lnum, cfg.alpha * lproj, cfg.beta * ldaq});
    res.iterations = it;
    if (it % cfg.convergence_window == 0 && it > phase1 + cfg.convergence_window) {
      double L = lnum + cfg.alpha * lproj + cfg.beta * ldaq;
      if (std::abs(prev_window_loss - L) <
          cfg.convergence_tol * std::max(std::abs(L), 1.0)) {
        res.converged = true;
        break;
      }
      prev_window_loss = L;
    }
  }

  st.weight_logits = logits;
  st.n_inf_params = ninf;
  // Map the internal normalized-frame intrinsics back to the input frame.
  Mat3 K_out = K0 * k_norm(kp).K;
  st.K_params << K_out(0, 0), K_out(1, 1), K_out(0, 1), K_out(0, 2), K_out(1, 2);

  res.soft_weights = logits.unaryExpr([](double x) { return sigmoid(x); });
  res.calibration.K = Intrinsics(K_out);
  res.calibration.n_inf.n_inf = ninf;
  res.calibration.frame = cfg.frame;
  return res;
}

}  // namespace

SolveResult solve(const MeasurementMatrix& M, const SolverConfig& cfg) {
  cfg.validate();
  if (M.m_valid() < 8 || M.n_valid() < 2)
    throw SolverError("solve: need at least 2 views and 8 correspondences");

  SolverState st = init_state(M, cfg);
  SolveResult res = cfg.parameterization == Parameterization::kDirect
                        ? solve_direct(M, cfg, st)
                        : solve_generic(M, cfg, st);
  res.loss_trace = st.loss_trace;

  const int m = M.m_valid();
  res.inlier_mask.assign(m, 0);
  int count = 0;
  for (int j = 0; j < m; ++j) {
    res.inlier_mask[j] = res.soft_weights(j) > cfg.inlier_threshold;
    count += res.inlier_mask[j];
  }
  res.too_few_inliers = count < 8;

  // Reconstruction from the hard inlier-filtered matrix.
  try {
    MeasurementMatrix Mf = MeasurementMatrix::from_dense(M.valid_block());
    for (int j = 0; j < m; ++j) Mf.col_valid[j] = res.inlier_mask[j];
    if (count >= 8) {
      res.reconstruction = sturm_triggs_factorize(rank4_project(Mf));
      for (int j = 0; j < m; ++j)
        if (res.inlier_mask[j]) res.reconstruction_cols.push_back(j);
    } else {
      res.degenerate = true;
    }
  } catch (const std::runtime_error&) {
    res.degenerate = true;
  }
  return res;
}

}  // namespace scpsfm
