#pragma once

#include "scpsfm/solver.hpp"

namespace scpsfm {

/// Central finite-difference gradient of loss_daq with respect to w.
/// Each of the 2m probe evaluations refactorizes the weighted matrix, so the
/// work is embarrassingly parallel; the OpenMP version writes disjoint entries
/// and is bit-identical to the serial reference.
VecX daq_weight_gradient_fd_serial(const MeasurementMatrix& M, const VecX& w,
                                   const Intrinsics& K, const PlaneAtInfinity& n,
                                   double step = 1e-5);

VecX daq_weight_gradient_fd_parallel(const MeasurementMatrix& M, const VecX& w,
                                     const Intrinsics& K, const PlaneAtInfinity& n,
                                     double step = 1e-5);

}  // namespace scpsfm
