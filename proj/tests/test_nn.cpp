#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rdcc/errors.hpp"
#include "rdcc/grad_check.hpp"
#include "rdcc/nn.hpp"
#include "rdcc/rng.hpp"

using namespace rdcc;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t{std::move(shape)};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

ConvLayer random_conv(Rng& rng, int window, int dilation, std::size_t c_in,
                      std::size_t c_out) {
  ConvLayer f = make_conv_layer(window, dilation, c_in, c_out);
  f.w = random_tensor(rng, {static_cast<std::size_t>(window), c_in, c_out});
  f.b = random_tensor(rng, {c_out});
  return f;
}

// Textbook centred convolution for odd windows: out[i] = bias + sum over
// j in [-l, l] of f_j . x[i + j*d], zeros outside the sequence. Written
// independently of the library kernel (same summation order, so results
// must be bit-identical).
Tensor reference_conv_odd(const Tensor& x, const ConvLayer& f) {
  const std::size_t n = x.dim(0), ci = f.c_in(), co = f.c_out();
  const int l = (f.window - 1) / 2;
  Tensor y({n, co});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < co; ++k) {
      double acc = f.b[k];
      for (int j = -l; j <= l; ++j) {
        const long p = static_cast<long>(i) + static_cast<long>(j) * f.dilation;
        if (p < 0 || p >= static_cast<long>(n)) continue;
        for (std::size_t c = 0; c < ci; ++c)
          acc += f.w(static_cast<std::size_t>(j + l), c, k) *
                 x(static_cast<std::size_t>(p), c);
      }
      y(i, k) = acc;
    }
  return y;
}

// Scalar-channel direct sliding sum used for the hand-checkable examples.
std::vector<double> direct_sum(const std::vector<double>& x,
                               const std::vector<double>& taps, int window,
                               int dilation) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (int j = 0; j < window; ++j) {
      const long p =
          static_cast<long>(i) + conv_tap_offset(window, dilation, j);
      if (p >= 0 && p < static_cast<long>(x.size()))
        y[i] += taps[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(p)];
    }
  return y;
}

ConvLayer scalar_conv(const std::vector<double>& taps, int dilation) {
  ConvLayer f = make_conv_layer(static_cast<int>(taps.size()), dilation, 1, 1);
  for (std::size_t j = 0; j < taps.size(); ++j) f.w(j, 0, 0) = taps[j];
  return f;
}

std::vector<double> column(const Tensor& t) {
  return std::vector<double>(t.data(), t.data() + t.size());
}

}  // namespace

TEST_CASE("tap offsets follow the window parity rule") {
  CHECK(conv_tap_offset(3, 1, 0) == -1);
  CHECK(conv_tap_offset(3, 1, 2) == 1);
  CHECK(conv_tap_offset(2, 1, 0) == 0);
  CHECK(conv_tap_offset(2, 1, 1) == 1);
  CHECK(conv_tap_offset(2, 5, 1) == 5);
  CHECK(conv_tap_offset(4, 2, 0) == -2);
  CHECK(conv_tap_offset(4, 2, 3) == 4);
}

TEST_CASE("conv1d hand-checked examples") {
  const Tensor x = Tensor::from({3, 1}, {1, 2, 3});

  SUBCASE("window 3, all-one taps") {
    const auto f = scalar_conv({1, 1, 1}, 1);
    CHECK(column(conv1d(x, f)) == std::vector<double>{3, 6, 5});
    CHECK(column(conv1d(x, f)) == direct_sum({1, 2, 3}, {1, 1, 1}, 3, 1));
  }
  SUBCASE("window 3, dilation 2 reaches -2/+2") {
    const auto f = scalar_conv({1, 1, 1}, 2);
    CHECK(column(conv1d(x, f)) == std::vector<double>{4, 2, 4});
    CHECK(column(conv1d(x, f)) == direct_sum({1, 2, 3}, {1, 1, 1}, 3, 2));
  }
  SUBCASE("window 1 with unit weight is the identity for any dilation") {
    for (int d : {1, 2, 7}) {
      const auto f = scalar_conv({1}, d);
      CHECK(column(conv1d(x, f)) == std::vector<double>{1, 2, 3});
    }
  }
  SUBCASE("window 2 taps are {0, +d}; a huge dilation sees only tap 0") {
    const auto f = scalar_conv({1, 1}, 3);
    CHECK(column(conv1d(x, f)) == std::vector<double>{1, 2, 3});
    CHECK(column(conv1d(x, f)) == direct_sum({1, 2, 3}, {1, 1}, 2, 3));
  }
}

TEST_CASE("conv1d rejects mismatched shapes naming dimensions") {
  const auto f = make_conv_layer(3, 1, 4, 2);
  CHECK_THROWS_WITH_AS(conv1d(Tensor({5, 3}), f), doctest::Contains("c_in"),
                       std::invalid_argument);
  ConvLayer bad = f;
  bad.b = Tensor({3});
  CHECK_THROWS_AS(conv1d(Tensor({5, 4}), bad), std::invalid_argument);
}

TEST_CASE("dilation 1 is bit-identical to the centred reference, 200 cases") {
  Rng rng(61);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 1 + rng.index(10);
    const std::size_t ci = 1 + rng.index(4), co = 1 + rng.index(4);
    const int w = 1 + 2 * static_cast<int>(rng.index(3));  // 1, 3, 5
    const auto f = random_conv(rng, w, 1, ci, co);
    const auto x = random_tensor(rng, {n, ci});
    const Tensor got = conv1d(x, f);
    const Tensor want = reference_conv_odd(x, f);
    REQUIRE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
  }
}

TEST_CASE("conv respects range boundaries in packed input") {
  Rng rng(67);
  const auto f = random_conv(rng, 3, 1, 2, 2);
  const auto a = random_tensor(rng, {4, 2});
  const auto b = random_tensor(rng, {3, 2});
  Tensor packed({7, 2});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 2; ++c) packed(i, c) = a(i, c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) packed(4 + i, c) = b(i, c);
  Tensor y;
  conv1d_packed(packed, {{0, 4}, {4, 3}}, f, y);
  const Tensor ya = conv1d(a, f), yb = conv1d(b, f);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(y(i, c) == ya(i, c));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(y(4 + i, c) == yb(i, c));
}

TEST_CASE("conv1d_backward trivial identities") {
  Rng rng(71);
  const auto x = random_tensor(rng, {5, 3});

  SUBCASE("zero upstream gives zero grads") {
    const auto f = random_conv(rng, 3, 2, 3, 2);
    const auto g = conv1d_backward(x, f, Tensor({5, 2}));
    for (std::size_t i = 0; i < g.gx.size(); ++i) CHECK(g.gx[i] == 0.0);
    for (std::size_t i = 0; i < g.gw.size(); ++i) CHECK(g.gw[i] == 0.0);
    for (std::size_t i = 0; i < g.gb.size(); ++i) CHECK(g.gb[i] == 0.0);
  }
  SUBCASE("window-1 identity filter passes the gradient through") {
    ConvLayer f = make_conv_layer(1, 1, 3, 3);
    for (std::size_t c = 0; c < 3; ++c) f.w(0, c, c) = 1.0;
    const auto gy = random_tensor(rng, {5, 3});
    const auto g = conv1d_backward(x, f, gy);
    for (std::size_t i = 0; i < gy.size(); ++i) CHECK(g.gx[i] == gy[i]);
  }
  SUBCASE("bias gradient is the column sum of the upstream gradient") {
    const auto f = random_conv(rng, 2, 3, 3, 2);
    const auto gy = random_tensor(rng, {5, 2});
    const auto g = conv1d_backward(x, f, gy);
    for (std::size_t k = 0; k < 2; ++k) {
      double want = 0.0;
      for (std::size_t i = 0; i < 5; ++i) want += gy(i, k);
      CHECK(g.gb[k] == doctest::Approx(want).epsilon(1e-15));
    }
  }
}

TEST_CASE("conv1d_backward matches finite differences") {
  Rng rng(73);
  for (const auto& [w, d] : std::vector<std::pair<int, int>>{
           {3, 1}, {2, 2}, {4, 3}, {1, 1}}) {
    auto f = random_conv(rng, w, d, 3, 2);
    auto x = random_tensor(rng, {6, 3});
    const auto gy = random_tensor(rng, {6, 2});

    // Scalarize through a fixed random projection (the upstream grad).
    auto loss = [&] {
      const Tensor y = conv1d(x, f);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * gy[i];
      return s;
    };
    const auto g = conv1d_backward(x, f, gy);
    CHECK(grad_check(loss, {x.data(), x.size()}, {g.gx.data(), g.gx.size()},
                     1e-5, 1e-6)
              .ok);
    CHECK(grad_check(loss, {f.w.data(), f.w.size()},
                     {g.gw.data(), g.gw.size()}, 1e-5, 1e-6)
              .ok);
    CHECK(grad_check(loss, {f.b.data(), f.b.size()},
                     {g.gb.data(), g.gb.size()}, 1e-5, 1e-6)
              .ok);
  }
}

TEST_CASE("batch_norm train mode standardizes each channel") {
  Rng rng(79);
  BatchNorm bn = make_batch_norm(3);
  const auto x = random_tensor(rng, {40, 3}, -4.0, 4.0);
  const Tensor y = batch_norm(x, bn, Mode::Train);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 40; ++i) mean += y(i, j);
    mean /= 40.0;
    for (std::size_t i = 0; i < 40; ++i)
      var += (y(i, j) - mean) * (y(i, j) - mean);
    var /= 40.0;
    CHECK(std::abs(mean) < 1e-10);
    // Biased variance, shrunk slightly by the epsilon in the denominator.
    CHECK(var == doctest::Approx(1.0).epsilon(2e-3));
  }
}

TEST_CASE("batch_norm constant column maps to zero via the epsilon guard") {
  BatchNorm bn = make_batch_norm(2);
  Tensor x({5, 2});
  for (std::size_t i = 0; i < 5; ++i) {
    x(i, 0) = 3.25;
    x(i, 1) = -1.5;
  }
  const Tensor y = batch_norm(x, bn, Mode::Train);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("batch_norm applies gamma and beta after standardizing") {
  Rng rng(83);
  BatchNorm bn = make_batch_norm(2);
  bn.gamma.fill(2.0);
  bn.beta.fill(3.0);
  const auto x = random_tensor(rng, {16, 2});
  BatchNorm plain = make_batch_norm(2);
  const Tensor xhat = batch_norm(x, plain, Mode::Train);
  const Tensor y = batch_norm(x, bn, Mode::Train);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(y[i] == doctest::Approx(2.0 * xhat[i] + 3.0).epsilon(1e-12));
}

TEST_CASE("batch_norm train mode needs two rows") {
  BatchNorm bn = make_batch_norm(2);
  CHECK_THROWS_AS(batch_norm(Tensor({1, 2}), bn, Mode::Train),
                  std::invalid_argument);
  // Inference works on a single row.
  CHECK_NOTHROW(batch_norm(Tensor({1, 2}), bn, Mode::Infer));
}

TEST_CASE("batch_norm running statistics blend with momentum") {
  Rng rng(89);
  BatchNorm bn = make_batch_norm(1, 0.9, 1e-3);
  Tensor x({4, 1});
  x[0] = 1.0;
  x[1] = 2.0;
  x[2] = 3.0;
  x[3] = 4.0;  // mean 2.5, biased var 1.25
  batch_norm(x, bn, Mode::Train);
  CHECK(bn.run_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 2.5));
  CHECK(bn.run_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.25));

  // Inference then uses the blended statistics.
  const Tensor y = batch_norm(x, bn, Mode::Infer);
  const double inv = 1.0 / std::sqrt(bn.run_var[0] + bn.eps);
  CHECK(y(0, 0) == doctest::Approx((1.0 - bn.run_mean[0]) * inv));
}

TEST_CASE("batch_norm backward matches finite differences") {
  Rng rng(97);
  auto x = random_tensor(rng, {7, 3});
  BatchNorm bn = make_batch_norm(3);
  bn.gamma = random_tensor(rng, {3}, 0.5, 1.5);
  bn.beta = random_tensor(rng, {3});
  const auto gy = random_tensor(rng, {7, 3});

  auto loss = [&] {
    BatchNorm tmp = bn;  // keep running stats out of the picture
    const Tensor y = batch_norm(x, tmp, Mode::Train);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * gy[i];
    return s;
  };

  BnCache cache;
  batch_norm(x, bn, Mode::Train, &cache);
  Tensor gx({7, 3});
  BatchNorm grads = bn;
  grads.ggamma.fill(0.0);
  grads.gbeta.fill(0.0);
  batch_norm_backward(gy, cache, grads, gx);

  CHECK(grad_check(loss, {x.data(), x.size()}, {gx.data(), gx.size()}, 1e-5,
                   1e-4)
            .ok);
  CHECK(grad_check(loss, {bn.gamma.data(), bn.gamma.size()},
                   {grads.ggamma.data(), grads.ggamma.size()}, 1e-5, 1e-4)
            .ok);
  CHECK(grad_check(loss, {bn.beta.data(), bn.beta.size()},
                   {grads.gbeta.data(), grads.gbeta.size()}, 1e-5, 1e-4)
            .ok);
}

TEST_CASE("leaky_relu elementwise values") {
  const Tensor x = Tensor::from({1, 3}, {5.0, -2.0, 0.0});
  const Tensor y = leaky_relu(x, 0.01);
  CHECK(y[0] == 5.0);
  CHECK(y[1] == doctest::Approx(-0.02));
  CHECK(y[2] == 0.0);
  CHECK_THROWS_AS(leaky_relu(x, 1.5), std::invalid_argument);

  Tensor gx({1, 3});
  leaky_relu_backward(x, Tensor::from({1, 3}, {1, 1, 1}), 0.01, gx);
  CHECK(gx[0] == 1.0);
  CHECK(gx[1] == 0.01);
  CHECK(gx[2] == 0.01);  // subgradient at 0 is alpha
}

TEST_CASE("zero-weight residual block is an exact identity") {
  Rng rng(101);
  ResidualBlock blk = make_residual_block(2, 3, 4, 0.99, 1e-3);
  const auto x = random_tensor(rng, {6, 4});
  const Tensor y = residual_block(x, blk, Mode::Train, 0.01);
  REQUIRE(y.same_shape(x));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("residual block on one row stays finite in inference") {
  Rng rng(103);
  ResidualBlock blk = make_residual_block(2, 1, 3, 0.99, 1e-3);
  blk.conv1.w = random_tensor(rng, blk.conv1.w.shape());
  blk.conv2.w = random_tensor(rng, blk.conv2.w.shape());
  const auto x = random_tensor(rng, {1, 3});
  const Tensor y = residual_block(x, blk, Mode::Infer, 0.01);
  CHECK(y.shape() == std::vector<std::size_t>{1, 3});
  CHECK(y.all_finite());
}

TEST_CASE("residual block output minus input equals the transform alone") {
  Rng rng(107);
  ResidualBlock blk = make_residual_block(2, 2, 4, 0.99, 1e-3);
  blk.conv1.w = random_tensor(rng, blk.conv1.w.shape());
  blk.conv1.b = random_tensor(rng, {4});
  blk.conv2.w = random_tensor(rng, blk.conv2.w.shape());
  const auto x = random_tensor(rng, {5, 4});

  ResidualBlock same = blk;
  const Tensor with_skip = residual_block(x, blk, Mode::Train, 0.01, true);
  const Tensor without = residual_block(x, same, Mode::Train, 0.01, false);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(with_skip[i] == without[i] + x[i]);
}

TEST_CASE("residual block backward matches finite differences") {
  Rng rng(109);
  ResidualBlock blk = make_residual_block(2, 3, 3, 0.99, 1e-3);
  blk.conv1.w = random_tensor(rng, blk.conv1.w.shape());
  blk.conv1.b = random_tensor(rng, {3});
  blk.conv2.w = random_tensor(rng, blk.conv2.w.shape());
  blk.conv2.b = random_tensor(rng, {3});
  blk.bn1.gamma = random_tensor(rng, {3}, 0.5, 1.5);
  blk.bn2.beta = random_tensor(rng, {3});
  auto x = random_tensor(rng, {6, 3});
  const auto gy = random_tensor(rng, {6, 3});
  const Ranges ranges = {{0, 6}};

  auto loss = [&] {
    ResidualBlock tmp = blk;
    const Tensor y = residual_block(x, tmp, Mode::Train, 0.01);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * gy[i];
    return s;
  };

  ResidualBlockCache cache;
  ResidualBlock work = blk;
  residual_block(x, work, Mode::Train, 0.01, true, &ranges, &cache);
  const Tensor gx =
      residual_block_backward(work, cache, gy, 0.01, true, ranges);

  CHECK(grad_check(loss, {x.data(), x.size()}, {gx.data(), gx.size()}, 1e-5,
                   1e-4)
            .ok);
  CHECK(grad_check(loss, {blk.conv1.w.data(), blk.conv1.w.size()},
                   {work.conv1.gw.data(), work.conv1.gw.size()}, 1e-5, 1e-4)
            .ok);
  CHECK(grad_check(loss, {blk.conv2.w.data(), blk.conv2.w.size()},
                   {work.conv2.gw.data(), work.conv2.gw.size()}, 1e-5, 1e-4)
            .ok);
  CHECK(grad_check(loss, {blk.bn1.gamma.data(), blk.bn1.gamma.size()},
                   {work.bn1.ggamma.data(), work.bn1.ggamma.size()}, 1e-5,
                   1e-4)
            .ok);
  CHECK(grad_check(loss, {blk.bn2.beta.data(), blk.bn2.beta.size()},
                   {work.bn2.gbeta.data(), work.bn2.gbeta.size()}, 1e-5, 1e-4)
            .ok);
}

TEST_CASE("receptive_field examples") {
  CHECK(receptive_field({{3, 1}}) == std::set<int>{-1, 0, 1});
  CHECK(receptive_field({{2, 1}, {2, 1}, {2, 3}, {2, 3}}) ==
        std::set<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(receptive_field({{3, 1}, {3, 1}}) == std::set<int>{-2, -1, 0, 1, 2});
  CHECK(receptive_field({}) == std::set<int>{0});
}

TEST_CASE("receptive_field matches a Minkowski-sum oracle") {
  Rng rng(113);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<std::pair<int, int>> layers;
    const std::size_t depth = 1 + rng.index(4);
    for (std::size_t i = 0; i < depth; ++i)
      layers.push_back({1 + static_cast<int>(rng.index(4)),
                        1 + static_cast<int>(rng.index(3))});
    std::set<int> want = {0};
    for (const auto& [w, d] : layers) {
      std::set<int> taps;
      for (int j = 0; j < w; ++j) taps.insert(conv_tap_offset(w, d, j));
      std::set<int> next;
      for (int a : want)
        for (int b : taps) next.insert(a + b);
      want = next;
    }
    CHECK(receptive_field(layers) == want);
  }
}

TEST_CASE("perturbation changes exactly the receptive field positions") {
  Rng rng(127);
  int done = 0;
  while (done < 20) {
    const std::size_t n = 32, c = 2;
    std::vector<std::pair<int, int>> layers;
    const std::size_t depth = 1 + rng.index(3);
    int reach = 0;  // sum of per-layer max |offset|
    for (std::size_t i = 0; i < depth; ++i) {
      const int w = 1 + static_cast<int>(rng.index(3));
      const int d = 1 + static_cast<int>(rng.index(3));
      layers.push_back({w, d});
      int layer_max = 0;
      for (int j = 0; j < w; ++j)
        layer_max = std::max(layer_max, std::abs(conv_tap_offset(w, d, j)));
      reach += layer_max;
    }
    // Keep the perturbed position far enough from both edges that zero
    // padding cannot clip any receptive-field path.
    if (2 * reach >= static_cast<int>(n) - 2 * reach - 1) continue;
    ++done;

    std::vector<ConvLayer> convs;
    std::size_t ch = c;
    for (const auto& [w, d] : layers) {
      convs.push_back(random_conv(rng, w, d, ch, 2));
      ch = 2;
    }
    auto run = [&](const Tensor& input) {
      Tensor h = input;
      for (auto& f : convs) h = conv1d(h, f);
      return h;
    };
    const auto x = random_tensor(rng, {n, c});
    const Tensor base = run(x);
    const std::set<int> field = receptive_field(layers);

    const std::size_t lo = static_cast<std::size_t>(2 * reach);
    const std::size_t hi = n - static_cast<std::size_t>(2 * reach) - 1;
    const std::size_t p = lo + rng.index(hi - lo + 1);
    Tensor bumped = x;
    for (std::size_t j = 0; j < c; ++j) bumped(p, j) += 0.5;
    const Tensor moved = run(bumped);

    std::set<int> changed;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        if (moved(i, j) != base(i, j)) {
          changed.insert(static_cast<int>(p) - static_cast<int>(i));
          break;
        }
    CHECK(changed == field);
  }
}

TEST_CASE("grad_check is near-zero for a linear map") {
  std::vector<double> params = {1.5, -2.0, 0.25};
  const std::vector<double> coef = {3.0, -1.0, 2.0};
  auto f = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) s += coef[i] * params[i];
    return s;
  };
  const auto r = grad_check(f, params, coef, 1e-5, 1e-10);
  CHECK(r.max_rel_err <= 1e-10);
  CHECK(r.ok);
}

TEST_CASE("grad_check flags an analytic gradient scaled by two") {
  std::vector<double> params = {0.7};
  auto f = [&] { return 3.0 * params[0]; };
  const std::vector<double> doubled = {6.0};
  const auto r = grad_check(f, params, doubled, 1e-5, 1e-4);
  // |a - n| / max(|a|, |n|) with a = 2n gives 1/2.
  CHECK(r.max_rel_err == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(!r.ok);
}

TEST_CASE("grad_check rejects non-finite functions") {
  std::vector<double> params = {0.0};
  auto f = [&] { return std::log(params[0]); };  // NaN at the -h probe
  const std::vector<double> grad = {0.0};
  CHECK_THROWS_AS(grad_check(f, params, grad, 1e-5, 1e-4), NumericError);
}
