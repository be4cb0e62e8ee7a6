#include "scpsfm/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scpsfm {

namespace {
inline double probe(const MeasurementMatrix& M, VecX w, int j, double delta,
                    const Intrinsics& K, const PlaneAtInfinity& n) {
  w(j) += delta;
  return loss_daq(w, M, K, n);
}
}  // namespace

VecX daq_weight_gradient_fd_serial(const MeasurementMatrix& M, const VecX& w,
                                   const Intrinsics& K, const PlaneAtInfinity& n,
                                   double step) {
  const int m = static_cast<int>(w.size());
  VecX g(m);
  for (int j = 0; j < m; ++j)
    g(j) = (probe(M, w, j, step, K, n) - probe(M, w, j, -step, K, n)) / (2 * step);
  return g;
}

VecX daq_weight_gradient_fd_parallel(const MeasurementMatrix& M, const VecX& w,
                                     const Intrinsics& K, const PlaneAtInfinity& n,
                                     double step) {
  const int m = static_cast<int>(w.size());
  VecX g(m);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < m; ++j)
    g(j) = (probe(M, w, j, step, K, n) - probe(M, w, j, -step, K, n)) / (2 * step);
  return g;
}

}  // namespace scpsfm
