#pragma once

#include "scpsfm/geometry.hpp"

namespace scpsfm {

/// Permutation-invariant column encoder: a shared per-column MLP
/// (input_dim -> 64 -> 128 -> 1024, rectifier), coordinate-wise max pool over
/// columns, a segmentation head concat(h2, global) -> 256 -> 1 producing one
/// logit per column, and a regression head global -> 256 -> 3 producing the
/// plane-at-infinity estimate. Intrinsics stay outside the encoder.
class Encoder {
 public:
  explicit Encoder(int input_dim);

  int param_count() const { return total_; }

  /// Glorot-uniform initialization, biases zero; deterministic per seed.
  VecX init_params(uint64_t seed) const;

  struct Cache {
    MatX h1, h2, h3;    // activations per column
    MatX s1;            // seg hidden per column
    VecX g;             // pooled global feature
    VecX c1;            // cls hidden
    std::vector<int> argmax;  // pooling source column per global coordinate
  };

  void forward(const MatX& cols, const VecX& params, VecX& logits, Vec3& n_inf,
               Cache* cache = nullptr) const;

  /// Gradient of L w.r.t. params given dL/dlogits and dL/dn_inf.
  VecX backward(const MatX& cols, const VecX& params, const Cache& cache,
                const VecX& dlogits, const Vec3& dninf) const;

 private:
  int d_;
  // Packed parameter offsets, each weight stored row-major then its bias.
  int o_w1_, o_b1_, o_w2_, o_b2_, o_w3_, o_b3_;
  int o_ws1_, o_bs1_, o_ws2_, o_bs2_;
  int o_wc1_, o_bc1_, o_wc2_, o_bc2_;
  int total_;
};

}  // namespace scpsfm
