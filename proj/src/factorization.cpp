#include "scpsfm/factorization.hpp"

#include <Eigen/SVD>
#include <numeric>

namespace scpsfm {

namespace {

std::vector<int> flags_to_indices(const std::vector<char>& flags) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(flags.size()); ++i)
    if (flags[i]) idx.push_back(i);
  return idx;
}

// Force the largest-magnitude entry of each column of U positive, compensating
// in V, so factorizations are deterministic.
void fix_svd_signs(MatX& U, MatX& V) {
  for (int k = 0; k < U.cols(); ++k) {
    int imax = 0;
    U.col(k).cwiseAbs().maxCoeff(&imax);
    if (U(imax, k) < 0) {
      U.col(k) = -U.col(k);
      if (k < V.cols()) V.col(k) = -V.col(k);
    }
  }
}

}  // namespace

int MeasurementMatrix::n_valid() const {
  return static_cast<int>(std::count(row_valid.begin(), row_valid.end(), 1));
}

int MeasurementMatrix::m_valid() const {
  return static_cast<int>(std::count(col_valid.begin(), col_valid.end(), 1));
}

std::vector<int> MeasurementMatrix::valid_view_indices() const {
  return flags_to_indices(row_valid);
}

std::vector<int> MeasurementMatrix::valid_col_indices() const {
  return flags_to_indices(col_valid);
}

MatX MeasurementMatrix::valid_block() const {
  auto vi = valid_view_indices();
  auto cj = valid_col_indices();
  MatX B(3 * vi.size(), cj.size());
  for (size_t a = 0; a < vi.size(); ++a)
    for (size_t b = 0; b < cj.size(); ++b)
      B.block<3, 1>(3 * a, b) = entries.block<3, 1>(3 * vi[a], cj[b]);
  return B;
}

MeasurementMatrix MeasurementMatrix::from_dense(const MatX& entries) {
  if (entries.rows() % 3 != 0)
    throw FactorizationError("from_dense: row count not divisible by 3");
  MeasurementMatrix M;
  M.entries = entries;
  M.row_valid.assign(entries.rows() / 3, 1);
  M.col_valid.assign(entries.cols(), 1);
  return M;
}

MeasurementMatrix build_measurement_matrix(const CorrespondenceTracks& tracks,
                                           const DepthAssignment& depths) {
  if (tracks.n != depths.n || tracks.m != depths.m)
    throw FactorizationError("build_measurement_matrix: dimension mismatch");
  MatX M(3 * tracks.n, tracks.m);
  for (int i = 0; i < tracks.n; ++i)
    for (int j = 0; j < tracks.m; ++j)
      M.block<3, 1>(3 * i, j) = depths.lambdas(i, j) * tracks.at(i, j).coords;
  return MeasurementMatrix::from_dense(M);
}

FundamentalMatrix estimate_fundamental(const std::vector<HomPoint2>& pts_a,
                                       const std::vector<HomPoint2>& pts_b) {
  const int m = static_cast<int>(pts_a.size());
  if (m < 8 || static_cast<int>(pts_b.size()) != m)
    throw FactorizationError("estimate_fundamental: need >= 8 correspondences");

  // Hartley normalization: centroid to origin, mean distance sqrt(2).
  auto normalize = [](const std::vector<HomPoint2>& pts, std::vector<Vec2>& out) {
    Vec2 c = Vec2::Zero();
    out.resize(pts.size());
    for (size_t j = 0; j < pts.size(); ++j) {
      out[j] = pts[j].dehomogenize();
      c += out[j];
    }
    c /= static_cast<double>(pts.size());
    double d = 0;
    for (auto& p : out) {
      p -= c;
      d += p.norm();
    }
    d /= static_cast<double>(pts.size());
    double s = d > 0 ? std::sqrt(2.0) / d : 1.0;
    for (auto& p : out) p *= s;
    Mat3 T;
    T << s, 0, -s * c(0), 0, s, -s * c(1), 0, 0, 1;
    return T;
  };

  std::vector<Vec2> na, nb;
  Mat3 Ta = normalize(pts_a, na);
  Mat3 Tb = normalize(pts_b, nb);

  MatX A(m, 9);
  for (int j = 0; j < m; ++j) {
    double x = na[j](0), y = na[j](1), xp = nb[j](0), yp = nb[j](1);
    A.row(j) << xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1;
  }
  Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeThinV);
  // Degenerate motions (pure rotation, planar scenes) legitimately enlarge the
  // null space to up to 3 dimensions; only flag configurations degenerate
  // beyond that (e.g. collinear points), where no valid F is determined.
  if (svd.singularValues()(5) < 1e-12 * svd.singularValues()(0))
    throw FactorizationError("estimate_fundamental: degenerate configuration");
  VecX f = svd.matrixV().col(8);
  Mat3 Fn;
  Fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);

  // Rank-2 enforcement in the normalized frame.
  Eigen::JacobiSVD<Mat3> svf(Fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svf.singularValues();
  s(2) = 0;
  Fn = svf.matrixU() * s.asDiagonal() * svf.matrixV().transpose();

  Mat3 F = Tb.transpose() * Fn * Ta;
  // Re-enforce rank 2 after denormalization (exact in theory, not in floats).
  Eigen::JacobiSVD<Mat3> svf2(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s2 = svf2.singularValues();
  s2(2) = 0;
  F = svf2.matrixU() * s2.asDiagonal() * svf2.matrixV().transpose();
  F /= F.norm();
  // Deterministic sign: largest-|.| entry positive.
  Eigen::Index r, c;
  F.cwiseAbs().maxCoeff(&r, &c);
  if (F(r, c) < 0) F = -F;
  return FundamentalMatrix{F};
}

HomPoint2 epipole(const FundamentalMatrix& F) {
  Eigen::JacobiSVD<Mat3> svd(F.entries, Eigen::ComputeFullU);
  Vec3 s = svd.singularValues();
  if (s(1) < 1e-12 * s(0))
    throw FactorizationError("epipole: F has rank < 2");
  Vec3 e = svd.matrixU().col(2);  // left null vector: F^T e' = 0
  int imax = 0;
  e.cwiseAbs().maxCoeff(&imax);
  if (e(imax) < 0) e = -e;
  return HomPoint2(e);
}

DepthAssignment estimate_depths(const CorrespondenceTracks& tracks,
                                DepthStrategy strategy,
                                const DepthAssignment* ground_truth) {
  DepthAssignment d;
  d.n = tracks.n;
  d.m = tracks.m;
  switch (strategy) {
    case DepthStrategy::kUnit:
      d.lambdas = MatX::Ones(tracks.n, tracks.m);
      return d;
    case DepthStrategy::kGroundTruth:
      if (!ground_truth || ground_truth->n != tracks.n || ground_truth->m != tracks.m)
        throw FactorizationError("estimate_depths: ground truth missing/mismatched");
      return *ground_truth;
    case DepthStrategy::kFundamentalChain:
      break;
  }
  if (tracks.n < 2)
    throw FactorizationError("estimate_depths: fundamental_chain needs n >= 2");

  d.lambdas = MatX::Ones(tracks.n, tracks.m);
  d.degenerate.assign(tracks.m, 0);

  // Points normalized to last coordinate 1 so the depth relation is
  // well-scaled; star topology anchored at view 1.
  std::vector<HomPoint2> base(tracks.m, HomPoint2());
  for (int j = 0; j < tracks.m; ++j) {
    Vec2 p = tracks.at(0, j).dehomogenize();
    base[j] = HomPoint2(p(0), p(1), 1.0);
  }
  for (int i = 1; i < tracks.n; ++i) {
    std::vector<HomPoint2> cur(tracks.m, HomPoint2());
    for (int j = 0; j < tracks.m; ++j) {
      Vec2 p = tracks.at(i, j).dehomogenize();
      cur[j] = HomPoint2(p(0), p(1), 1.0);
    }
    FundamentalMatrix F = estimate_fundamental(base, cur);
    Vec3 e = epipole(F).coords;
    for (int j = 0; j < tracks.m; ++j) {
      Vec3 cx = e.cross(cur[j].coords);
      double denom = cx.squaredNorm();
      if (denom < 1e-10) {
        d.degenerate[j] = 1;
        continue;
      }
      Vec3 line = F.entries * base[j].coords;
      double lam = d.lambdas(0, j) * cx.dot(line) / denom;
      if (std::abs(lam) < 1e-10) {
        d.degenerate[j] = 1;
        continue;
      }
      d.lambdas(i, j) = lam;
    }
  }
  return d;
}

MeasurementMatrix rank4_project(const MeasurementMatrix& M) {
  MatX B = M.valid_block();
  if (std::min(B.rows(), B.cols()) < 4)
    throw FactorizationError("rank4_project: valid block smaller than rank 4");
  Eigen::BDCSVD<MatX> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  MatX U = svd.matrixU().leftCols(4);
  MatX V = svd.matrixV().leftCols(4);
  Vec4 s = svd.singularValues().head<4>();
  MatX R = U * s.asDiagonal() * V.transpose();

  MeasurementMatrix out = M;
  auto vi = M.valid_view_indices();
  auto cj = M.valid_col_indices();
  for (size_t a = 0; a < vi.size(); ++a)
    for (size_t b = 0; b < cj.size(); ++b)
      out.entries.block<3, 1>(3 * vi[a], cj[b]) = R.block<3, 1>(3 * a, b);
  return out;
}

ProjectiveReconstruction sturm_triggs_factorize(const MeasurementMatrix& M) {
  MatX B = M.valid_block();
  if (std::min(B.rows(), B.cols()) < 4)
    throw FactorizationError("sturm_triggs_factorize: valid block smaller than rank 4");
  Eigen::BDCSVD<MatX> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  VecX s = svd.singularValues();
  if (s(3) < 1e-12 * s(0))
    throw FactorizationError("sturm_triggs_factorize: structure degenerate (rank < 4)");
  MatX U = svd.matrixU().leftCols(4);
  MatX V = svd.matrixV().leftCols(4);
  fix_svd_signs(U, V);
  Vec4 sq = s.head<4>().cwiseSqrt();
  MatX P = U * sq.asDiagonal();              // 3n x 4
  MatX X = sq.asDiagonal() * V.transpose();  // 4 x m

  ProjectiveReconstruction recon;
  const int n = static_cast<int>(B.rows()) / 3;
  const int m = static_cast<int>(B.cols());
  recon.cameras.reserve(n);
  recon.points.reserve(m);
  for (int i = 0; i < n; ++i)
    recon.cameras.emplace_back(Mat34(P.block<3, 4>(3 * i, 0)));
  for (int j = 0; j < m; ++j) recon.points.emplace_back(Vec4(X.col(j)));
  return recon;
}

ProjectiveReconstruction normalize_first_camera(const ProjectiveReconstruction& recon) {
  if (recon.cameras.empty())
    throw FactorizationError("normalize_first_camera: empty reconstruction");
  const Mat34& P1 = recon.cameras[0].entries;
  if (recon.cameras[0].rank() < 3)
    throw FactorizationError("normalize_first_camera: first camera rank-deficient");
  // Fourth row: unit vector spanning the null space of P1 (best conditioning).
  Eigen::JacobiSVD<Mat34> svd(P1, Eigen::ComputeFullV);
  Vec4 ns = svd.matrixV().col(3);
  Mat4 H;
  H.topRows<3>() = P1;
  H.row(3) = ns.transpose();
  ProjectiveReconstruction out = apply_homography(Homography4(H), recon);
  // Clean the first camera to exactly [I|0] (it is there up to roundoff).
  Mat34 eye;
  eye << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
  out.cameras[0] = CameraMatrix(eye);
  return out;
}

double weighted_reprojection_residual(const MeasurementMatrix& M,
                                      const ProjectiveReconstruction& recon,
                                      const VecX& w) {
  MatX B = M.valid_block();
  const int n = static_cast<int>(B.rows()) / 3;
  const int m = static_cast<int>(B.cols());
  if (static_cast<int>(recon.cameras.size()) != n ||
      static_cast<int>(recon.points.size()) != m || w.size() != m)
    throw FactorizationError("weighted_reprojection_residual: dimension mismatch");
  MatX PX(3 * n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      PX.block<3, 1>(3 * i, j) = recon.cameras[i].entries * recon.points[j].coords;
  return ((B - PX) * w.asDiagonal()).norm();
}

}  // namespace scpsfm
