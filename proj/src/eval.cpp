#include "scpsfm/eval.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <set>
#include <sstream>

namespace scpsfm {

ClassificationReport f1_score(const std::vector<char>& pred_mask,
                              const std::vector<char>& true_mask) {
  if (pred_mask.size() != true_mask.size())
    throw EvalError("f1_score: mask length mismatch");
  ClassificationReport r;
  for (size_t j = 0; j < pred_mask.size(); ++j) {
    if (pred_mask[j] && true_mask[j]) ++r.true_positives;
    if (pred_mask[j] && !true_mask[j]) ++r.false_positives;
    if (!pred_mask[j] && true_mask[j]) ++r.false_negatives;
  }
  long pd = r.true_positives + r.false_positives;
  long rd = r.true_positives + r.false_negatives;
  r.precision = pd > 0 ? static_cast<double>(r.true_positives) / pd : 0.0;
  r.recall = rd > 0 ? static_cast<double>(r.true_positives) / rd : 0.0;
  r.f1 = (r.precision + r.recall) > 0
             ? 2 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

double error_2d(const ProjectiveReconstruction& recon,
                const CorrespondenceTracks& tracks,
                const std::vector<char>& eval_mask, int* n_skipped) {
  const int n = tracks.n;
  if (static_cast<int>(recon.cameras.size()) != n ||
      static_cast<int>(recon.points.size()) != tracks.m ||
      static_cast<int>(eval_mask.size()) != tracks.m)
    throw EvalError("error_2d: dimension mismatch");
  int skipped = 0;
  double sum = 0;
  long used = 0;
  for (int j = 0; j < tracks.m; ++j) {
    if (!eval_mask[j]) continue;
    double sq = 0;
    int views = 0;
    for (int i = 0; i < n; ++i) {
      try {
        Vec2 rp = project_point(recon.cameras[i], recon.points[j]).dehomogenize();
        Vec2 obs = tracks.at(i, j).dehomogenize();
        sq += (rp - obs).squaredNorm();
        ++views;
      } catch (const GeometryError&) {
        ++skipped;
      }
    }
    if (views > 0) {
      sum += std::sqrt(sq / views);
      ++used;
    }
  }
  if (n_skipped) *n_skipped = skipped;
  return used > 0 ? sum / used : 0.0;
}

namespace {

// DLT for a 4x4 homography mapping est -> true (needs >= 5 pairs).
Mat4 fit_homography4(const std::vector<Vec4>& est, const std::vector<Vec4>& tru) {
  const int m = static_cast<int>(est.size());
  // Each pair contributes Y_p (HX)_q - Y_q (HX)_p = 0 for p < q.
  MatX A(6 * m, 16);
  int row = 0;
  for (int k = 0; k < m; ++k) {
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) {
        A.row(row).setZero();
        for (int c = 0; c < 4; ++c) {
          A(row, 4 * q + c) += tru[k](p) * est[k](c);
          A(row, 4 * p + c) -= tru[k](q) * est[k](c);
        }
        ++row;
      }
  }
  Eigen::BDCSVD<MatX> svd(A, Eigen::ComputeThinV);
  VecX h = svd.matrixV().col(15);
  Mat4 H;
  for (int p = 0; p < 4; ++p)
    for (int c = 0; c < 4; ++c) H(p, c) = h(4 * p + c);
  if (std::abs(H.determinant()) < 1e-14)
    throw EvalError("error_3d: singular homography alignment");
  return H;
}

// Similarity (scale, rotation, translation) est -> true via Procrustes.
void fit_similarity(const std::vector<Vec3>& est, const std::vector<Vec3>& tru,
                    double& s, Mat3& R, Vec3& t) {
  const int m = static_cast<int>(est.size());
  Vec3 ce = Vec3::Zero(), ct = Vec3::Zero();
  for (int k = 0; k < m; ++k) {
    ce += est[k];
    ct += tru[k];
  }
  ce /= m;
  ct /= m;
  Mat3 C = Mat3::Zero();
  double var = 0;
  for (int k = 0; k < m; ++k) {
    C += (tru[k] - ct) * (est[k] - ce).transpose();
    var += (est[k] - ce).squaredNorm();
  }
  Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) D(2, 2) = -1;
  R = svd.matrixU() * D * svd.matrixV().transpose();
  double tr = (svd.singularValues().asDiagonal() * D).trace();
  if (var < 1e-30) throw EvalError("error_3d: degenerate point cloud");
  s = tr / var;
  t = ct - s * R * ce;
}

}  // namespace

double error_3d(const std::vector<HomPoint3>& points_est,
                const std::vector<HomPoint3>& points_true,
                const std::vector<char>& mask, Alignment alignment) {
  if (points_est.size() != points_true.size() || mask.size() != points_est.size())
    throw EvalError("error_3d: dimension mismatch");
  std::vector<int> idx;
  for (size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) idx.push_back(static_cast<int>(j));
  const int need = alignment == Alignment::kHomography ? 5 : 3;
  if (static_cast<int>(idx.size()) < need)
    throw EvalError("error_3d: insufficient masked points for alignment");

  double sum = 0;
  if (alignment == Alignment::kHomography) {
    std::vector<Vec4> est, tru;
    for (int j : idx) {
      est.push_back(points_est[j].coords.normalized());
      tru.push_back(points_true[j].coords.normalized());
    }
    Mat4 H = fit_homography4(est, tru);
    for (size_t k = 0; k < est.size(); ++k) {
      Vec3 a = HomPoint3(Vec4(H * est[k])).dehomogenize();
      Vec3 b = HomPoint3(tru[k]).dehomogenize();
      sum += (a - b).norm() / b.norm();
    }
  } else {
    std::vector<Vec3> est, tru;
    for (int j : idx) {
      est.push_back(points_est[j].dehomogenize());
      tru.push_back(points_true[j].dehomogenize());
    }
    double s;
    Mat3 R;
    Vec3 t;
    fit_similarity(est, tru, s, R, t);
    for (size_t k = 0; k < est.size(); ++k) {
      Vec3 a = s * R * est[k] + t;
      sum += (a - tru[k]).norm() / tru[k].norm();
    }
  }
  return sum / idx.size();
}

double focal_error(const Intrinsics& K_est, const Intrinsics& K_true) {
  return std::abs(K_est.focal() - K_true.focal()) / K_true.focal();
}

std::vector<SweepCell> aggregate_sweep(const std::vector<SweepRecord>& results) {
  if (results.empty()) throw EvalError("aggregate_sweep: no results");
  std::map<std::tuple<std::string, double, std::string>, std::vector<const SweepRecord*>>
      groups;
  for (const auto& r : results)
    groups[{r.factor, r.value, r.variant}].push_back(&r);
  std::vector<SweepCell> cells;
  for (const auto& [key, recs] : groups) {
    SweepCell c;
    std::tie(c.factor, c.value, c.variant) = key;
    c.count = static_cast<int>(recs.size());
    std::set<std::string> names;
    for (const auto* r : recs)
      for (const auto& [k, v] : r->metrics) names.insert(k);
    for (const auto& name : names) {
      double sum = 0;
      int cnt = 0;
      for (const auto* r : recs) {
        auto it = r->metrics.find(name);
        if (it != r->metrics.end()) {
          sum += it->second;
          ++cnt;
        }
      }
      double mean = cnt ? sum / cnt : 0;
      double var = 0;
      for (const auto* r : recs) {
        auto it = r->metrics.find(name);
        if (it != r->metrics.end()) var += (it->second - mean) * (it->second - mean);
      }
      c.mean[name] = mean;
      c.stddev[name] = cnt > 1 ? std::sqrt(var / (cnt - 1)) : 0.0;
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
  std::set<std::string> names;
  for (const auto& c : cells)
    for (const auto& [k, v] : c.mean) names.insert(k);
  std::ostringstream os;
  os << "factor,value,variant,count";
  for (const auto& n : names) os << "," << n << "_mean," << n << "_std";
  os << "\n";
  for (const auto& c : cells) {
    os << c.factor << "," << c.value << "," << c.variant << "," << c.count;
    for (const auto& n : names) {
      auto itm = c.mean.find(n);
      auto its = c.stddev.find(n);
      os << "," << (itm != c.mean.end() ? itm->second : 0.0) << ","
         << (its != c.stddev.end() ? its->second : 0.0);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace scpsfm
