#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rdcc/config.hpp"
#include "rdcc/dictionary.hpp"
#include "rdcc/nn.hpp"
#include "rdcc/rng.hpp"
#include "rdcc/tensor.hpp"

namespace rdcc {

// Reserved embedding rows. PAD rows are frozen at zero; unknown characters
// map to UNK.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

// Dictionary feature vocabulary: PAD, "None", then the 21 tags.
inline constexpr int kFeatPadId = 0;
inline constexpr int kFeatNoneId = 1;
inline constexpr int kFeatVocabSize = 2 + kTagCount;

int dict_feature_id(const DictFeature& f);

// Character vocabulary in first-occurrence order, ids 2.. (after PAD/UNK).
class CharVocab {
 public:
  int add(char32_t c);                 // returns the id (existing or new)
  int id(char32_t c) const;            // kUnkId when absent
  int size() const { return 2 + static_cast<int>(chars_.size()); }
  const std::vector<char32_t>& chars() const { return chars_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int> index_;
};

struct EmbeddingTable {
  Tensor char_table;  // [V_x, d_x]
  Tensor feat_table;  // [V_d, d_d]
  Tensor gchar, gfeat;

  std::size_t d_x() const { return char_table.dim(1); }
  std::size_t d_d() const { return feat_table.dim(1); }
};

// Uniform init in +/- sqrt(3 / dim); PAD rows zeroed.
EmbeddingTable make_embeddings(std::size_t char_vocab, std::size_t d_x,
                               std::size_t d_d, Rng& rng);

// Row i = concat(char_table[char_ids[i]], feat_table[feat_ids[i]]).
// Works for a single sequence or for packed rows of a whole batch.
Tensor embed(std::span<const int> char_ids, std::span<const int> feat_ids,
             const EmbeddingTable& table);

// Scatters the embedding gradient back into the tables; PAD rows stay zero.
void embed_backward(std::span<const int> char_ids,
                    std::span<const int> feat_ids, const Tensor& grad,
                    EmbeddingTable& table);

struct EncoderConfig {
  int d_x = 128, d_d = 128;
  int n_r = 2, f_d = 256, w_d = 2, d_b = 3;
  int f_s = 256, w_s = 3;
  int tag_count = kTagCount;
  Branches branches = Branches::Both;
  bool residual = true;
  double leaky_alpha = 0.01;
  double bn_momentum = 0.99;
  double bn_eps = 1e-3;
};

EncoderConfig encoder_config(const TrainConfig& cfg);

// Two-branch convolutional encoder mapping embeddings [n, d_x + d_d] to
// per-position tag scores [n, K]. The left branch stacks residual blocks
// with dilations d_b^0, d_b^1, ...; the right branch is one standard
// convolution with batch normalization; the projection is a single affine
// map from the (summed) hidden state to tag scores.
struct Encoder {
  EncoderConfig cfg;
  std::vector<ResidualBlock> blocks;  // left branch; empty for Branches::Right
  ConvLayer right_conv;               // right branch; unused for Branches::Left
  BatchNorm right_bn;
  Tensor proj_w;  // [hidden, K]
  Tensor proj_b;  // [K]
  Tensor gproj_w, gproj_b;

  std::size_t hidden_dim() const {
    return cfg.branches == Branches::Right ? cfg.f_s : cfg.f_d;
  }
};

// Builds the architecture selected by the config (including the ablation
// switches) with seeded Glorot-uniform weights. Throws when the residual
// skip or the branch sum would be dimensionally impossible.
Encoder make_encoder(const EncoderConfig& cfg, Rng& rng);

struct EncoderCache {
  Tensor input;
  Ranges ranges;
  std::vector<ResidualBlockCache> blocks;
  Tensor right_s;
  BnCache right_bn;
  Tensor hidden;
};

// `rows` holds one or more sequences packed row-wise as described by
// `ranges`. In train mode batch-norm statistics pool over all packed rows.
Tensor encoder_forward(Encoder& enc, const Tensor& rows, const Ranges& ranges,
                       Mode mode, EncoderCache* cache = nullptr);

// Single-sequence convenience wrapper.
Tensor encode(Encoder& enc, const Tensor& embedded, Mode mode);

// Accumulates all encoder parameter gradients and returns the gradient with
// respect to the packed input rows.
Tensor encoder_backward(Encoder& enc, const EncoderCache& cache,
                        const Tensor& grad_scores);

}  // namespace rdcc
