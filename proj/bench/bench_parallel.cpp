// Compares the serial reference and the OpenMP version of the
// finite-difference calibration-loss weight gradient.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "scpsfm/parallel.hpp"
#include "scpsfm/rng.hpp"
#include "scpsfm/synthgen.hpp"

using namespace scpsfm;

namespace {

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("%-14s %8s %10s %10s %9s %12s\n", "size", "views", "serial_s",
              "openmp_s", "speedup", "max_abs_diff");

  for (int m : {50, 100, 200}) {
    SceneConfig scfg;
    scfg.n_views = 10;
    scfg.m_points = m;
    scfg.delta = 0.5;
    scfg.sigma = 0.003;
    scfg.seed = 42;
    auto inst = make_instance(scfg);

    VecX w(m);
    Rng rng(7);
    for (int j = 0; j < m; ++j) w(j) = rng.uniform(0.1, 0.9);
    Mat3 K;
    K << 770, 0, 320, 0, 770, 240, 0, 0, 1;
    PlaneAtInfinity n;
    n.n_inf = Vec3(0.05, -0.02, 0.03);

    VecX gs, gp;
    double ts = time_best_of(
        reps, [&] { gs = daq_weight_gradient_fd_serial(inst.M, w, Intrinsics(K), n); });
    double tp = time_best_of(reps, [&] {
      gp = daq_weight_gradient_fd_parallel(inst.M, w, Intrinsics(K), n);
    });
    double diff = (gs - gp).cwiseAbs().maxCoeff();

    char label[32];
    std::snprintf(label, sizeof(label), "m=%d", m);
    std::printf("%-14s %8d %10.4f %10.4f %8.2fx %12.3e\n", label, scfg.n_views, ts,
                tp, ts / tp, diff);
    if (diff != 0.0) {
      std::fprintf(stderr, "kernels disagree!\n");
      return 1;
    }
  }
  return 0;
}
