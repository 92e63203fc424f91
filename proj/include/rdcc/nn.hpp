#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "rdcc/tensor.hpp"

namespace rdcc {

enum class Mode { Train, Infer };

// Row ranges (offset, length) describing how a packed [m, c] matrix splits
// into independent sequences. Convolutions never read across a range
// boundary; positions outside a range are zeros.
using Ranges = std::vector<std::pair<std::size_t, std::size_t>>;

// Tap offset of tap index `tap` in [0, window). Odd windows are centred
// (offsets -l*d .. +l*d for window = 2l+1); even windows lean forward
// (offsets (-l+1)*d .. +l*d for window = 2l, so window 2 taps {0, +d}).
inline int conv_tap_offset(int window, int dilation, int tap) {
  return (tap - (window - 1) / 2) * dilation;
}

// 1-D convolution filter with bias and gradient companions.
struct ConvLayer {
  int window = 1;
  int dilation = 1;
  Tensor w;   // [window, c_in, c_out]
  Tensor b;   // [c_out]
  Tensor gw;  // shapes mirror w / b
  Tensor gb;

  std::size_t c_in() const { return w.dim(1); }
  std::size_t c_out() const { return w.dim(2); }
};

ConvLayer make_conv_layer(int window, int dilation, std::size_t c_in,
                          std::size_t c_out);

// y[i, k] = b[k] + sum over taps j and input channels of
//           w[j, :, k] . x[i + offset(j), :], zero-padded at range edges.
void conv1d_packed(const Tensor& x, const Ranges& ranges, const ConvLayer& f,
                   Tensor& y);
Tensor conv1d(const Tensor& x, const ConvLayer& f);

// Exact adjoints. Accumulates the filter gradients into f.gw / f.gb and the
// input gradient into gx (which must be pre-sized [n, c_in]).
void conv1d_backward_packed(const Tensor& x, const Ranges& ranges,
                            ConvLayer& f, const Tensor& gy, Tensor& gx);

struct ConvGrads {
  Tensor gx, gw, gb;
};
ConvGrads conv1d_backward(const Tensor& x, const ConvLayer& f,
                          const Tensor& gy);

// Per-channel batch normalization. Train mode normalizes by the biased batch
// statistics of the m rows and folds them into the running statistics with
// `momentum`; infer mode normalizes by the running statistics.
struct BatchNorm {
  Tensor gamma, beta;          // [c]
  Tensor run_mean, run_var;    // [c]
  Tensor ggamma, gbeta;
  double momentum = 0.99;
  double eps = 1e-3;

  std::size_t channels() const { return gamma.dim(0); }
};

BatchNorm make_batch_norm(std::size_t channels, double momentum = 0.99,
                          double eps = 1e-3);

struct BnCache {
  Tensor xhat;                  // [m, c]
  std::vector<double> inv_std;  // [c]
};

// Requires m >= 2 in train mode. The cache is needed for the backward pass.
Tensor batch_norm(const Tensor& x, BatchNorm& bn, Mode mode,
                  BnCache* cache = nullptr);

// Accumulates ggamma/gbeta into bn and the input gradient into gx
// (pre-sized [m, c]). Exact adjoint through the batch statistics.
void batch_norm_backward(const Tensor& gy, const BnCache& cache,
                         BatchNorm& bn, Tensor& gx);

// x > 0 ? x : alpha * x, elementwise. The subgradient at 0 is alpha.
Tensor leaky_relu(const Tensor& x, double alpha);
void leaky_relu_backward(const Tensor& x_pre, const Tensor& gy, double alpha,
                         Tensor& gx);

// Two conv+BN+LeakyReLU layers sharing one dilation, wrapped by an additive
// identity skip: o = x + F(x). Channel count is preserved.
struct ResidualBlock {
  ConvLayer conv1, conv2;
  BatchNorm bn1, bn2;
};

ResidualBlock make_residual_block(int window, int dilation,
                                  std::size_t channels, double bn_momentum,
                                  double bn_eps);

struct ResidualBlockCache {
  Tensor x_in, s1, h1, a1, s2, h2;
  BnCache bn1, bn2;
};

// `skip` = false drops the identity path (o = F(x)).
Tensor residual_block(const Tensor& x, ResidualBlock& blk, Mode mode,
                      double alpha, bool skip = true,
                      const Ranges* ranges = nullptr,
                      ResidualBlockCache* cache = nullptr);

// Accumulates all block parameter gradients and returns the input gradient.
Tensor residual_block_backward(ResidualBlock& blk,
                               const ResidualBlockCache& cache,
                               const Tensor& go, double alpha, bool skip,
                               const Ranges& ranges);

// Input offsets that can influence one output position of a stack of
// convolutions, i.e. the Minkowski sum of the per-layer tap-offset sets.
std::set<int> receptive_field(
    const std::vector<std::pair<int, int>>& window_dilation_pairs);

}  // namespace rdcc
