#pragma once

#include <string>
#include <vector>

#include "rdcc/config.hpp"
#include "rdcc/encoder.hpp"
#include "rdcc/tensor.hpp"

namespace rdcc {

// Named view of one parameter tensor and (for learnable ones) its gradient.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;  // nullptr for running statistics
};

// Everything the tagger learns: embeddings, the convolutional encoder and
// the CRF transition matrix [K+1, K].
struct Model {
  TrainConfig cfg;
  CharVocab vocab;
  EmbeddingTable emb;
  Encoder enc;
  Tensor trans;
  Tensor gtrans;

  int tag_count() const { return enc.cfg.tag_count; }

  // Learnable parameters in a fixed order (gradient-bearing).
  std::vector<ParamRef> learnable();
  // Learnable parameters plus batch-norm running statistics; this is the
  // serialization order of the model file.
  std::vector<ParamRef> persistent();

  void zero_grad();
};

// Seeded construction: embeddings, encoder weights, zero transitions.
Model make_model(const TrainConfig& cfg, CharVocab vocab);

}  // namespace rdcc
