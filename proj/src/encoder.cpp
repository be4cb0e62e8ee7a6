#include "scpsfm/encoder.hpp"

#include "scpsfm/rng.hpp"

namespace scpsfm {

namespace {
constexpr int kH1 = 64, kH2 = 128, kH3 = 1024, kSeg = 256, kCls = 256;
constexpr uint64_t kStreamEncoderInit = 7;

using ConstMap = Eigen::Map<const MatX>;
using ConstVecMap = Eigen::Map<const VecX>;
using Map = Eigen::Map<MatX>;
using VecMap = Eigen::Map<VecX>;
}  // namespace

Encoder::Encoder(int input_dim) : d_(input_dim) {
  int o = 0;
  auto layer = [&o](int& ow, int& ob, int out, int in) {
    ow = o;
    o += out * in;
    ob = o;
    o += out;
  };
  layer(o_w1_, o_b1_, kH1, d_);
  layer(o_w2_, o_b2_, kH2, kH1);
  layer(o_w3_, o_b3_, kH3, kH2);
  layer(o_ws1_, o_bs1_, kSeg, kH2 + kH3);
  layer(o_ws2_, o_bs2_, 1, kSeg);
  layer(o_wc1_, o_bc1_, kCls, kH3);
  layer(o_wc2_, o_bc2_, 3, kCls);
  total_ = o;
}

VecX Encoder::init_params(uint64_t seed) const {
  Rng rng = Rng::stream(seed, kStreamEncoderInit);
  VecX p = VecX::Zero(total_);
  auto fill = [&](int ow, int out, int in) {
    double bound = std::sqrt(6.0 / (in + out));
    for (int k = 0; k < out * in; ++k) p(ow + k) = rng.uniform(-bound, bound);
  };
  fill(o_w1_, kH1, d_);
  fill(o_w2_, kH2, kH1);
  fill(o_w3_, kH3, kH2);
  fill(o_ws1_, kSeg, kH2 + kH3);
  fill(o_ws2_, 1, kSeg);
  fill(o_wc1_, kCls, kH3);
  fill(o_wc2_, 3, kCls);
  return p;
}

void Encoder::forward(const MatX& cols, const VecX& params, VecX& logits,
                      Vec3& n_inf, Cache* cache) const {
  const int m = static_cast<int>(cols.cols());
  ConstMap W1(params.data() + o_w1_, kH1, d_);
  ConstVecMap b1(params.data() + o_b1_, kH1);
  ConstMap W2(params.data() + o_w2_, kH2, kH1);
  ConstVecMap b2(params.data() + o_b2_, kH2);
  ConstMap W3(params.data() + o_w3_, kH3, kH2);
  ConstVecMap b3(params.data() + o_b3_, kH3);
  ConstMap Ws1(params.data() + o_ws1_, kSeg, kH2 + kH3);
  ConstVecMap bs1(params.data() + o_bs1_, kSeg);
  ConstMap Ws2(params.data() + o_ws2_, 1, kSeg);
  double bs2 = params(o_bs2_);
  ConstMap Wc1(params.data() + o_wc1_, kCls, kH3);
  ConstVecMap bc1(params.data() + o_bc1_, kCls);
  ConstMap Wc2(params.data() + o_wc2_, 3, kCls);
  ConstVecMap bc2(params.data() + o_bc2_, 3);

  MatX h1 = ((W1 * cols).colwise() + b1).cwiseMax(0.0);
  MatX h2 = ((W2 * h1).colwise() + b2).cwiseMax(0.0);
  MatX h3 = ((W3 * h2).colwise() + b3).cwiseMax(0.0);

  VecX g(kH3);
  std::vector<int> argmax(kH3, 0);
  for (int k = 0; k < kH3; ++k) {
    Eigen::Index jmax;
    g(k) = h3.row(k).maxCoeff(&jmax);
    argmax[k] = static_cast<int>(jmax);
  }

  MatX z(kH2 + kH3, m);
  z.topRows(kH2) = h2;
  z.bottomRows(kH3).colwise() = g;
  MatX s1 = ((Ws1 * z).colwise() + bs1).cwiseMax(0.0);
  logits = (Ws2 * s1).transpose();
  logits.array() += bs2;

  VecX c1 = (Wc1 * g + bc1).cwiseMax(0.0);
  n_inf = Wc2 * c1 + bc2;

  if (cache) {
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->h3 = std::move(h3);
    cache->s1 = std::move(s1);
    cache->g = std::move(g);
    cache->c1 = std::move(c1);
    cache->argmax = std::move(argmax);
  }
}

VecX Encoder::backward(const MatX& cols, const VecX& params, const Cache& cache,
                       const VecX& dlogits, const Vec3& dninf) const {
  const int m = static_cast<int>(cols.cols());
  ConstMap W2(params.data() + o_w2_, kH2, kH1);
  ConstMap W3(params.data() + o_w3_, kH3, kH2);
  ConstMap Ws1(params.data() + o_ws1_, kSeg, kH2 + kH3);
  ConstMap Ws2(params.data() + o_ws2_, 1, kSeg);
  ConstMap Wc1(params.data() + o_wc1_, kCls, kH3);
  ConstMap Wc2(params.data() + o_wc2_, 3, kCls);

  VecX grad = VecX::Zero(total_);
  Map dW1(grad.data() + o_w1_, kH1, d_);
  VecMap db1(grad.data() + o_b1_, kH1);
  Map dW2(grad.data() + o_w2_, kH2, kH1);
  VecMap db2(grad.data() + o_b2_, kH2);
  Map dW3(grad.data() + o_w3_, kH3, kH2);
  VecMap db3(grad.data() + o_b3_, kH3);
  Map dWs1(grad.data() + o_ws1_, kSeg, kH2 + kH3);
  VecMap dbs1(grad.data() + o_bs1_, kSeg);
  Map dWs2(grad.data() + o_ws2_, 1, kSeg);
  Map dWc1(grad.data() + o_wc1_, kCls, kH3);
  VecMap dbc1(grad.data() + o_bc1_, kCls);
  Map dWc2(grad.data() + o_wc2_, 3, kCls);
  VecMap dbc2(grad.data() + o_bc2_, 3);

  // Segmentation head.
  dWs2 = (cache.s1 * dlogits).transpose();
  grad(o_bs2_) = dlogits.sum();
  MatX ds1 = (Ws2.transpose() * dlogits.transpose())
                 .cwiseProduct((cache.s1.array() > 0).cast<double>().matrix());
  MatX z(kH2 + kH3, m);
  z.topRows(kH2) = cache.h2;
  z.bottomRows(kH3).colwise() = cache.g;
  dWs1 = ds1 * z.transpose();
  dbs1 = ds1.rowwise().sum();
  MatX dz = Ws1.transpose() * ds1;
  MatX dh2 = dz.topRows(kH2);
  VecX dg = dz.bottomRows(kH3).rowwise().sum();

  // Regression head.
  VecX dc1 = (Wc2.transpose() * dninf)
                 .cwiseProduct((cache.c1.array() > 0).cast<double>().matrix());
  dWc2 = dninf * cache.c1.transpose();
  dbc2 = dninf;
  dWc1 = dc1 * cache.g.transpose();
  dbc1 = dc1;
  dg += Wc1.transpose() * dc1;

  // Max pool routes each global coordinate to its source column.
  MatX dh3 = MatX::Zero(kH3, m);
  for (int k = 0; k < kH3; ++k) dh3(k, cache.argmax[k]) = dg(k);
  dh3 = dh3.cwiseProduct((cache.h3.array() > 0).cast<double>().matrix());

  dW3 = dh3 * cache.h2.transpose();
  db3 = dh3.rowwise().sum();
  dh2 += W3.transpose() * dh3;
  dh2 = dh2.cwiseProduct((cache.h2.array() > 0).cast<double>().matrix());

  dW2 = dh2 * cache.h1.transpose();
  db2 = dh2.rowwise().sum();
  MatX dh1 = (W2.transpose() * dh2)
                 .cwiseProduct((cache.h1.array() > 0).cast<double>().matrix());

  dW1 = dh1 * cols.transpose();
  db1 = dh1.rowwise().sum();
  return grad;
}

}  // namespace scpsfm
