#include "rdcc/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rdcc/errors.hpp"
#include "rdcc/parallel.hpp"

namespace rdcc {

namespace {

void check_conv(const Tensor& x, const ConvLayer& f) {
  if (f.window < 1 || f.dilation < 1)
    throw std::invalid_argument("conv1d: window and dilation must be >= 1");
  if (f.w.rank() != 3 || f.w.dim(0) != static_cast<std::size_t>(f.window))
    throw std::invalid_argument(
        "conv1d: weights must be [window, c_in, c_out], got " +
        f.w.shape_str());
  if (f.b.rank() != 1 || f.b.dim(0) != f.c_out())
    throw std::invalid_argument("conv1d: bias must be [c_out] = [" +
                                std::to_string(f.c_out()) + "], got " +
                                f.b.shape_str());
  if (x.rank() != 2 || x.dim(1) != f.c_in())
    throw std::invalid_argument("conv1d: input must be [n, c_in] = [n, " +
                                std::to_string(f.c_in()) + "], got " +
                                x.shape_str());
}

// Per-row (sequence start, sequence length) lookup for a packed matrix.
struct RowIndex {
  std::vector<std::size_t> start, len;
};

RowIndex row_index(const Ranges& ranges, std::size_t rows) {
  RowIndex idx;
  idx.start.resize(rows);
  idx.len.resize(rows);
  std::size_t covered = 0;
  for (const auto& [off, len] : ranges) {
    if (off + len > rows)
      throw std::invalid_argument("conv1d: range exceeds packed rows");
    for (std::size_t i = 0; i < len; ++i) {
      idx.start[off + i] = off;
      idx.len[off + i] = len;
    }
    covered += len;
  }
  if (covered != rows)
    throw std::invalid_argument("conv1d: ranges must tile all packed rows");
  return idx;
}

}  // namespace

ConvLayer make_conv_layer(int window, int dilation, std::size_t c_in,
                          std::size_t c_out) {
  ConvLayer f;
  f.window = window;
  f.dilation = dilation;
  f.w = Tensor({static_cast<std::size_t>(window), c_in, c_out});
  f.b = Tensor({c_out});
  f.gw = Tensor({static_cast<std::size_t>(window), c_in, c_out});
  f.gb = Tensor({c_out});
  return f;
}

void conv1d_packed(const Tensor& x, const Ranges& ranges, const ConvLayer& f,
                   Tensor& y) {
  check_conv(x, f);
  const std::size_t rows = x.dim(0);
  if (y.rank() != 2 || y.dim(0) != rows || y.dim(1) != f.c_out())
    y = Tensor({rows, f.c_out()});

  const RowIndex idx = row_index(ranges, rows);
  const std::size_t ci_n = f.c_in(), co_n = f.c_out();
  const int w = f.window, d = f.dilation;
  const double* xd = x.data();
  const double* wd = f.w.data();
  const double* bd = f.b.data();
  double* yd = y.data();

  parallel_for(rows, [&](std::size_t g0, std::size_t g1) {
    for (std::size_t g = g0; g < g1; ++g) {
      const long local = static_cast<long>(g - idx.start[g]);
      const long len = static_cast<long>(idx.len[g]);
      double* yrow = yd + g * co_n;
      for (std::size_t k = 0; k < co_n; ++k) yrow[k] = bd[k];
      for (int j = 0; j < w; ++j) {
        const long p = local + conv_tap_offset(w, d, j);
        if (p < 0 || p >= len) continue;
        const double* xrow = xd + (idx.start[g] + static_cast<std::size_t>(p)) * ci_n;
        const double* wj = wd + static_cast<std::size_t>(j) * ci_n * co_n;
        for (std::size_t c = 0; c < ci_n; ++c) {
          const double a = xrow[c];
          const double* wrow = wj + c * co_n;
          for (std::size_t k = 0; k < co_n; ++k) yrow[k] += a * wrow[k];
        }
      }
    }
  });
}

Tensor conv1d(const Tensor& x, const ConvLayer& f) {
  Tensor y;
  conv1d_packed(x, {{0, x.dim(0)}}, f, y);
  return y;
}

void conv1d_backward_packed(const Tensor& x, const Ranges& ranges,
                            ConvLayer& f, const Tensor& gy, Tensor& gx) {
  check_conv(x, f);
  const std::size_t rows = x.dim(0);
  if (gy.rank() != 2 || gy.dim(0) != rows || gy.dim(1) != f.c_out())
    throw std::invalid_argument(
        "conv1d backward: upstream grad must be [n, c_out], got " +
        gy.shape_str());
  if (gx.rank() != 2 || gx.dim(0) != rows || gx.dim(1) != f.c_in())
    throw std::invalid_argument("conv1d backward: gx must be [n, c_in]");

  const RowIndex idx = row_index(ranges, rows);
  const std::size_t ci_n = f.c_in(), co_n = f.c_out();
  const int w = f.window, d = f.dilation;
  const double* xd = x.data();
  const double* wd = f.w.data();
  const double* gyd = gy.data();
  double* gwd = f.gw.data();
  double* gbd = f.gb.data();
  double* gxd = gx.data();

  // Bias gradient: column sums over all rows.
  for (std::size_t g = 0; g < rows; ++g) {
    const double* grow = gyd + g * co_n;
    for (std::size_t k = 0; k < co_n; ++k) gbd[k] += grow[k];
  }

  // Weight gradient. Each (tap, input channel) slice of gw is owned by one
  // worker and accumulated over rows in a fixed order, so the result does
  // not depend on the worker count.
  parallel_for(static_cast<std::size_t>(w) * ci_n,
               [&](std::size_t u0, std::size_t u1) {
    for (std::size_t u = u0; u < u1; ++u) {
      const int j = static_cast<int>(u / ci_n);
      const std::size_t c = u % ci_n;
      const int tap = conv_tap_offset(w, d, j);
      double* gwrow = gwd + u * co_n;
      for (std::size_t g = 0; g < rows; ++g) {
        const long p = static_cast<long>(g - idx.start[g]) + tap;
        if (p < 0 || p >= static_cast<long>(idx.len[g])) continue;
        const double a = xd[(idx.start[g] + static_cast<std::size_t>(p)) * ci_n + c];
        const double* grow = gyd + g * co_n;
        for (std::size_t k = 0; k < co_n; ++k) gwrow[k] += a * grow[k];
      }
    }
  });

  // Input gradient: each row of gx is owned by one worker.
  parallel_for(rows, [&](std::size_t g0, std::size_t g1) {
    for (std::size_t g = g0; g < g1; ++g) {
      const long local = static_cast<long>(g - idx.start[g]);
      const long len = static_cast<long>(idx.len[g]);
      double* gxrow = gxd + g * ci_n;
      for (int j = 0; j < w; ++j) {
        const long i = local - conv_tap_offset(w, d, j);
        if (i < 0 || i >= len) continue;
        const double* grow = gyd + (idx.start[g] + static_cast<std::size_t>(i)) * co_n;
        const double* wj = wd + static_cast<std::size_t>(j) * ci_n * co_n;
        for (std::size_t c = 0; c < ci_n; ++c) {
          const double* wrow = wj + c * co_n;
          double s = 0.0;
          for (std::size_t k = 0; k < co_n; ++k) s += wrow[k] * grow[k];
          gxrow[c] += s;
        }
      }
    }
  });
}

ConvGrads conv1d_backward(const Tensor& x, const ConvLayer& f,
                          const Tensor& gy) {
  ConvLayer tmp = f;
  tmp.gw.fill(0.0);
  tmp.gb.fill(0.0);
  ConvGrads g;
  g.gx = Tensor({x.dim(0), f.c_in()});
  conv1d_backward_packed(x, {{0, x.dim(0)}}, tmp, gy, g.gx);
  g.gw = std::move(tmp.gw);
  g.gb = std::move(tmp.gb);
  return g;
}

BatchNorm make_batch_norm(std::size_t channels, double momentum, double eps) {
  BatchNorm bn;
  bn.gamma = Tensor({channels});
  bn.gamma.fill(1.0);
  bn.beta = Tensor({channels});
  bn.run_mean = Tensor({channels});
  bn.run_var = Tensor({channels});
  bn.run_var.fill(1.0);
  bn.ggamma = Tensor({channels});
  bn.gbeta = Tensor({channels});
  bn.momentum = momentum;
  bn.eps = eps;
  return bn;
}

Tensor batch_norm(const Tensor& x, BatchNorm& bn, Mode mode, BnCache* cache) {
  const std::size_t c = bn.channels();
  if (x.rank() != 2 || x.dim(1) != c)
    throw std::invalid_argument("batch_norm: input must be [m, " +
                                std::to_string(c) + "], got " + x.shape_str());
  const std::size_t m = x.dim(0);
  Tensor y({m, c});

  if (mode == Mode::Infer) {
    std::vector<double> scale(c), shift(c);
    for (std::size_t j = 0; j < c; ++j) {
      const double inv = 1.0 / std::sqrt(bn.run_var[j] + bn.eps);
      scale[j] = bn.gamma[j] * inv;
      shift[j] = bn.beta[j] - bn.run_mean[j] * scale[j];
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j)
        y(i, j) = x(i, j) * scale[j] + shift[j];
    return y;
  }

  if (m < 2)
    throw std::invalid_argument(
        "batch_norm: train mode needs at least 2 rows, got " +
        std::to_string(m));

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) mean[j] += x(i, j);
  for (std::size_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x(i, j) - mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) var[j] /= static_cast<double>(m);

  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j)
    inv_std[j] = 1.0 / std::sqrt(var[j] + bn.eps);

  Tensor xhat({m, c});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x(i, j) - mean[j]) * inv_std[j];
      xhat(i, j) = h;
      y(i, j) = bn.gamma[j] * h + bn.beta[j];
    }

  for (std::size_t j = 0; j < c; ++j) {
    bn.run_mean[j] =
        bn.momentum * bn.run_mean[j] + (1.0 - bn.momentum) * mean[j];
    bn.run_var[j] = bn.momentum * bn.run_var[j] + (1.0 - bn.momentum) * var[j];
  }

  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

void batch_norm_backward(const Tensor& gy, const BnCache& cache,
                         BatchNorm& bn, Tensor& gx) {
  const std::size_t m = cache.xhat.dim(0), c = cache.xhat.dim(1);
  if (!gy.same_shape(cache.xhat) || !gx.same_shape(cache.xhat))
    throw std::invalid_argument("batch_norm backward: shape mismatch");

  std::vector<double> sum_gy(c, 0.0), sum_gy_xhat(c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      sum_gy[j] += gy(i, j);
      sum_gy_xhat[j] += gy(i, j) * cache.xhat(i, j);
    }
  for (std::size_t j = 0; j < c; ++j) {
    bn.ggamma[j] += sum_gy_xhat[j];
    bn.gbeta[j] += sum_gy[j];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double g = gy(i, j) - inv_m * sum_gy[j] -
                       cache.xhat(i, j) * inv_m * sum_gy_xhat[j];
      gx(i, j) += bn.gamma[j] * cache.inv_std[j] * g;
    }
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("leaky_relu: alpha must be in (0, 1)");
  Tensor y = x;
  double* d = y.data();
  for (std::size_t i = 0; i < y.size(); ++i)
    if (d[i] <= 0.0) d[i] *= alpha;
  return y;
}

void leaky_relu_backward(const Tensor& x_pre, const Tensor& gy, double alpha,
                         Tensor& gx) {
  if (!x_pre.same_shape(gy) || !x_pre.same_shape(gx))
    throw std::invalid_argument("leaky_relu backward: shape mismatch");
  const double* xd = x_pre.data();
  const double* gd = gy.data();
  double* od = gx.data();
  for (std::size_t i = 0; i < gx.size(); ++i)
    od[i] += xd[i] > 0.0 ? gd[i] : alpha * gd[i];
}

ResidualBlock make_residual_block(int window, int dilation,
                                  std::size_t channels, double bn_momentum,
                                  double bn_eps) {
  ResidualBlock blk;
  blk.conv1 = make_conv_layer(window, dilation, channels, channels);
  blk.conv2 = make_conv_layer(window, dilation, channels, channels);
  blk.bn1 = make_batch_norm(channels, bn_momentum, bn_eps);
  blk.bn2 = make_batch_norm(channels, bn_momentum, bn_eps);
  return blk;
}

Tensor residual_block(const Tensor& x, ResidualBlock& blk, Mode mode,
                      double alpha, bool skip, const Ranges* ranges,
                      ResidualBlockCache* cache) {
  if (x.rank() != 2 || x.dim(1) != blk.conv1.c_in())
    throw std::invalid_argument("residual_block: input " + x.shape_str() +
                                " does not match block channels " +
                                std::to_string(blk.conv1.c_in()));
  if (skip && blk.conv1.c_in() != blk.conv2.c_out())
    throw std::invalid_argument(
        "residual_block: identity skip needs c_in == c_out, got " +
        std::to_string(blk.conv1.c_in()) + " vs " +
        std::to_string(blk.conv2.c_out()));
  Ranges local;
  if (ranges == nullptr) {
    local = {{0, x.dim(0)}};
    ranges = &local;
  }
  Tensor s1;
  conv1d_packed(x, *ranges, blk.conv1, s1);
  BnCache bc1;
  Tensor h1 = batch_norm(s1, blk.bn1, mode, cache ? &bc1 : nullptr);
  Tensor a1 = leaky_relu(h1, alpha);
  Tensor s2;
  conv1d_packed(a1, *ranges, blk.conv2, s2);
  BnCache bc2;
  Tensor h2 = batch_norm(s2, blk.bn2, mode, cache ? &bc2 : nullptr);
  Tensor o = leaky_relu(h2, alpha);
  if (skip) {
    double* od = o.data();
    const double* xd = x.data();
    for (std::size_t i = 0; i < o.size(); ++i) od[i] += xd[i];
  }
  if (cache != nullptr) {
    cache->x_in = x;
    cache->s1 = std::move(s1);
    cache->h1 = std::move(h1);
    cache->a1 = std::move(a1);
    cache->s2 = std::move(s2);
    cache->h2 = std::move(h2);
    cache->bn1 = std::move(bc1);
    cache->bn2 = std::move(bc2);
  }
  return o;
}

Tensor residual_block_backward(ResidualBlock& blk,
                               const ResidualBlockCache& cache,
                               const Tensor& go, double alpha, bool skip,
                               const Ranges& ranges) {
  const std::size_t m = cache.x_in.dim(0);
  const std::size_t c_in = blk.conv1.c_in();
  const std::size_t c_mid = blk.conv1.c_out();
  const std::size_t c_out = blk.conv2.c_out();
  Tensor gh2({m, c_out});
  leaky_relu_backward(cache.h2, go, alpha, gh2);
  Tensor gs2({m, c_out});
  batch_norm_backward(gh2, cache.bn2, blk.bn2, gs2);
  Tensor ga1({m, c_mid});
  conv1d_backward_packed(cache.a1, ranges, blk.conv2, gs2, ga1);
  Tensor gh1({m, c_mid});
  leaky_relu_backward(cache.h1, ga1, alpha, gh1);
  Tensor gs1({m, c_mid});
  batch_norm_backward(gh1, cache.bn1, blk.bn1, gs1);
  Tensor gx({m, c_in});
  conv1d_backward_packed(cache.x_in, ranges, blk.conv1, gs1, gx);
  if (skip) {
    double* gd = gx.data();
    const double* od = go.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gd[i] += od[i];
  }
  return gx;
}

std::set<int> receptive_field(
    const std::vector<std::pair<int, int>>& window_dilation_pairs) {
  std::set<int> offsets = {0};
  for (const auto& [w, d] : window_dilation_pairs) {
    std::set<int> next;
    for (int base : offsets)
      for (int j = 0; j < w; ++j) next.insert(base + conv_tap_offset(w, d, j));
    offsets = std::move(next);
  }
  return offsets;
}

}  // namespace rdcc
