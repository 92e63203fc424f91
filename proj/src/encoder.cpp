#include "rdcc/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "rdcc/parallel.hpp"

namespace rdcc {

int dict_feature_id(const DictFeature& f) {
  return f ? 2 + tag_id(*f) : kFeatNoneId;
}

int CharVocab::add(char32_t c) {
  const auto it = index_.find(c);
  if (it != index_.end()) return it->second;
  const int id = size();
  chars_.push_back(c);
  index_.emplace(c, id);
  return id;
}

int CharVocab::id(char32_t c) const {
  const auto it = index_.find(c);
  return it == index_.end() ? kUnkId : it->second;
}

namespace {

void init_uniform(Tensor& t, double bound, Rng& rng) {
  double* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = rng.uniform(-bound, bound);
}

void init_conv(ConvLayer& f, Rng& rng) {
  const double fan_in = static_cast<double>(f.window) * f.c_in();
  const double fan_out = static_cast<double>(f.window) * f.c_out();
  init_uniform(f.w, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

}  // namespace

EmbeddingTable make_embeddings(std::size_t char_vocab, std::size_t d_x,
                               std::size_t d_d, Rng& rng) {
  EmbeddingTable t;
  t.char_table = Tensor({char_vocab, d_x});
  t.feat_table = Tensor({static_cast<std::size_t>(kFeatVocabSize), d_d});
  init_uniform(t.char_table, std::sqrt(3.0 / static_cast<double>(d_x)), rng);
  init_uniform(t.feat_table, std::sqrt(3.0 / static_cast<double>(d_d)), rng);
  for (std::size_t j = 0; j < d_x; ++j) t.char_table(kPadId, j) = 0.0;
  for (std::size_t j = 0; j < d_d; ++j) t.feat_table(kFeatPadId, j) = 0.0;
  t.gchar = Tensor({char_vocab, d_x});
  t.gfeat = Tensor({static_cast<std::size_t>(kFeatVocabSize), d_d});
  return t;
}

Tensor embed(std::span<const int> char_ids, std::span<const int> feat_ids,
             const EmbeddingTable& table) {
  if (char_ids.size() != feat_ids.size())
    throw std::invalid_argument("embed: id sequences differ in length");
  const std::size_t n = char_ids.size();
  const std::size_t dx = table.d_x(), dd = table.d_d();
  Tensor e({n, dx + dd});
  for (std::size_t i = 0; i < n; ++i) {
    const int c = char_ids[i], f = feat_ids[i];
    if (c < 0 || static_cast<std::size_t>(c) >= table.char_table.dim(0))
      throw std::invalid_argument("embed: char id " + std::to_string(c) +
                                  " out of range [0, " +
                                  std::to_string(table.char_table.dim(0)) + ")");
    if (f < 0 || static_cast<std::size_t>(f) >= table.feat_table.dim(0))
      throw std::invalid_argument("embed: feature id " + std::to_string(f) +
                                  " out of range [0, " +
                                  std::to_string(table.feat_table.dim(0)) + ")");
    for (std::size_t j = 0; j < dx; ++j) e(i, j) = table.char_table(c, j);
    for (std::size_t j = 0; j < dd; ++j) e(i, dx + j) = table.feat_table(f, j);
  }
  return e;
}

void embed_backward(std::span<const int> char_ids,
                    std::span<const int> feat_ids, const Tensor& grad,
                    EmbeddingTable& table) {
  const std::size_t n = char_ids.size();
  const std::size_t dx = table.d_x(), dd = table.d_d();
  if (grad.rank() != 2 || grad.dim(0) != n || grad.dim(1) != dx + dd)
    throw std::invalid_argument("embed_backward: grad shape mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const int c = char_ids[i], f = feat_ids[i];
    if (c != kPadId)
      for (std::size_t j = 0; j < dx; ++j) table.gchar(c, j) += grad(i, j);
    if (f != kFeatPadId)
      for (std::size_t j = 0; j < dd; ++j)
        table.gfeat(f, j) += grad(i, dx + j);
  }
}

EncoderConfig encoder_config(const TrainConfig& cfg) {
  EncoderConfig e;
  e.d_x = cfg.d_x;
  e.d_d = cfg.d_d;
  e.n_r = cfg.n_r;
  e.f_d = cfg.f_d;
  e.w_d = cfg.w_d;
  e.d_b = cfg.d_b;
  e.f_s = cfg.f_s;
  e.w_s = cfg.w_s;
  e.branches = cfg.branches;
  e.residual = cfg.residual;
  e.leaky_alpha = cfg.leaky_alpha;
  e.bn_momentum = cfg.bn_momentum;
  e.bn_eps = cfg.bn_eps;
  return e;
}

Encoder make_encoder(const EncoderConfig& cfg, Rng& rng) {
  if (cfg.d_x < 1 || cfg.d_d < 1 || cfg.f_d < 1 || cfg.f_s < 1 ||
      cfg.w_d < 1 || cfg.w_s < 1 || cfg.d_b < 1 || cfg.n_r < 1 ||
      cfg.tag_count < 1)
    throw std::invalid_argument("encoder: all sizes must be >= 1");
  const std::size_t d_in = static_cast<std::size_t>(cfg.d_x + cfg.d_d);
  const bool left = cfg.branches != Branches::Right;
  const bool right = cfg.branches != Branches::Left;
  if (left && cfg.residual && static_cast<std::size_t>(cfg.f_d) != d_in)
    throw std::invalid_argument(
        "encoder: the residual skip needs f_d == d_x + d_d, got f_d = " +
        std::to_string(cfg.f_d) + " vs " + std::to_string(d_in));
  if (cfg.branches == Branches::Both && cfg.f_d != cfg.f_s)
    throw std::invalid_argument(
        "encoder: summing both branches needs f_d == f_s, got " +
        std::to_string(cfg.f_d) + " vs " + std::to_string(cfg.f_s));

  Encoder enc;
  enc.cfg = cfg;
  if (left) {
    for (int i = 0; i < cfg.n_r; ++i) {
      int dilation = 1;
      for (int p = 0; p < i; ++p) dilation *= cfg.d_b;
      const std::size_t c_in = i == 0 ? d_in : static_cast<std::size_t>(cfg.f_d);
      ResidualBlock blk;
      blk.conv1 = make_conv_layer(cfg.w_d, dilation, c_in,
                                  static_cast<std::size_t>(cfg.f_d));
      blk.conv2 = make_conv_layer(cfg.w_d, dilation,
                                  static_cast<std::size_t>(cfg.f_d),
                                  static_cast<std::size_t>(cfg.f_d));
      blk.bn1 = make_batch_norm(cfg.f_d, cfg.bn_momentum, cfg.bn_eps);
      blk.bn2 = make_batch_norm(cfg.f_d, cfg.bn_momentum, cfg.bn_eps);
      init_conv(blk.conv1, rng);
      init_conv(blk.conv2, rng);
      enc.blocks.push_back(std::move(blk));
    }
  }
  if (right) {
    enc.right_conv = make_conv_layer(cfg.w_s, 1, d_in,
                                     static_cast<std::size_t>(cfg.f_s));
    enc.right_bn = make_batch_norm(cfg.f_s, cfg.bn_momentum, cfg.bn_eps);
    init_conv(enc.right_conv, rng);
  }
  const std::size_t hidden = enc.hidden_dim();
  const std::size_t k = static_cast<std::size_t>(cfg.tag_count);
  enc.proj_w = Tensor({hidden, k});
  enc.proj_b = Tensor({k});
  enc.gproj_w = Tensor({hidden, k});
  enc.gproj_b = Tensor({k});
  init_uniform(enc.proj_w,
               std::sqrt(6.0 / (static_cast<double>(hidden) + static_cast<double>(k))),
               rng);
  return enc;
}

namespace {

// scores = hidden . proj_w + proj_b, parallel over rows.
void project(const Tensor& hidden, const Tensor& w, const Tensor& b,
             Tensor& scores) {
  const std::size_t m = hidden.dim(0), h = hidden.dim(1), k = w.dim(1);
  scores = Tensor({m, k});
  const double* hd = hidden.data();
  const double* wd = w.data();
  const double* bd = b.data();
  double* sd = scores.data();
  parallel_for(m, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      double* srow = sd + i * k;
      const double* hrow = hd + i * h;
      for (std::size_t t = 0; t < k; ++t) srow[t] = bd[t];
      for (std::size_t c = 0; c < h; ++c) {
        const double a = hrow[c];
        const double* wrow = wd + c * k;
        for (std::size_t t = 0; t < k; ++t) srow[t] += a * wrow[t];
      }
    }
  });
}

}  // namespace

Tensor encoder_forward(Encoder& enc, const Tensor& rows, const Ranges& ranges,
                       Mode mode, EncoderCache* cache) {
  const std::size_t d_in = static_cast<std::size_t>(enc.cfg.d_x + enc.cfg.d_d);
  if (rows.rank() != 2 || rows.dim(1) != d_in)
    throw std::invalid_argument("encoder: input must be [n, " +
                                std::to_string(d_in) + "], got " +
                                rows.shape_str());
  const bool left = enc.cfg.branches != Branches::Right;
  const bool right = enc.cfg.branches != Branches::Left;

  if (cache != nullptr) {
    cache->input = rows;
    cache->ranges = ranges;
    cache->blocks.clear();
    cache->blocks.resize(enc.blocks.size());
  }

  Tensor hidden;
  if (left) {
    Tensor x = rows;
    for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
      const bool skip = enc.cfg.residual;
      x = residual_block(x, enc.blocks[i], mode, enc.cfg.leaky_alpha, skip,
                         &ranges, cache ? &cache->blocks[i] : nullptr);
    }
    hidden = std::move(x);
  }
  if (right) {
    Tensor s;
    conv1d_packed(rows, ranges, enc.right_conv, s);
    BnCache bc;
    Tensor h = batch_norm(s, enc.right_bn, mode, cache ? &bc : nullptr);
    if (cache != nullptr) {
      cache->right_s = std::move(s);
      cache->right_bn = std::move(bc);
    }
    if (left) {
      double* hd = hidden.data();
      const double* rd = h.data();
      for (std::size_t i = 0; i < hidden.size(); ++i) hd[i] += rd[i];
    } else {
      hidden = std::move(h);
    }
  }

  Tensor scores;
  project(hidden, enc.proj_w, enc.proj_b, scores);
  if (cache != nullptr) cache->hidden = std::move(hidden);
  return scores;
}

Tensor encode(Encoder& enc, const Tensor& embedded, Mode mode) {
  return encoder_forward(enc, embedded, {{0, embedded.dim(0)}}, mode);
}

Tensor encoder_backward(Encoder& enc, const EncoderCache& cache,
                        const Tensor& grad_scores) {
  const std::size_t m = cache.hidden.dim(0);
  const std::size_t h = cache.hidden.dim(1);
  const std::size_t k = enc.proj_w.dim(1);
  if (grad_scores.rank() != 2 || grad_scores.dim(0) != m ||
      grad_scores.dim(1) != k)
    throw std::invalid_argument("encoder backward: grad shape mismatch");

  // Projection gradients.
  {
    const double* hd = cache.hidden.data();
    const double* gd = grad_scores.data();
    double* gw = enc.gproj_w.data();
    parallel_for(h, [&](std::size_t c0, std::size_t c1) {
      for (std::size_t c = c0; c < c1; ++c) {
        double* gwrow = gw + c * k;
        for (std::size_t i = 0; i < m; ++i) {
          const double a = hd[i * h + c];
          const double* grow = gd + i * k;
          for (std::size_t t = 0; t < k; ++t) gwrow[t] += a * grow[t];
        }
      }
    });
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t t = 0; t < k; ++t)
        enc.gproj_b[t] += grad_scores(i, t);
  }

  // Hidden gradient.
  Tensor ghidden({m, h});
  {
    const double* gd = grad_scores.data();
    const double* wd = enc.proj_w.data();
    double* od = ghidden.data();
    parallel_for(m, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t i = r0; i < r1; ++i) {
        const double* grow = gd + i * k;
        double* orow = od + i * h;
        for (std::size_t c = 0; c < h; ++c) {
          const double* wrow = wd + c * k;
          double s = 0.0;
          for (std::size_t t = 0; t < k; ++t) s += wrow[t] * grow[t];
          orow[c] = s;
        }
      }
    });
  }

  const bool left = enc.cfg.branches != Branches::Right;
  const bool right = enc.cfg.branches != Branches::Left;
  const std::size_t d_in = static_cast<std::size_t>(enc.cfg.d_x + enc.cfg.d_d);
  Tensor ginput({m, d_in});

  if (right) {
    Tensor gs({m, static_cast<std::size_t>(enc.cfg.f_s)});
    batch_norm_backward(ghidden, cache.right_bn, enc.right_bn, gs);
    conv1d_backward_packed(cache.input, cache.ranges, enc.right_conv, gs,
                           ginput);
  }
  if (left) {
    Tensor g = ghidden;
    for (std::size_t i = enc.blocks.size(); i-- > 0;) {
      g = residual_block_backward(enc.blocks[i], cache.blocks[i], g,
                                  enc.cfg.leaky_alpha, enc.cfg.residual,
                                  cache.ranges);
    }
    double* gi = ginput.data();
    const double* gd = g.data();
    for (std::size_t i = 0; i < ginput.size(); ++i) gi[i] += gd[i];
  }
  return ginput;
}

}  // namespace rdcc
