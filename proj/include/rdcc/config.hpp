#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rdcc {

// Which halves of the convolutional encoder are active.
enum class Branches { Left, Right, Both };

std::string_view branches_name(Branches b);
std::optional<Branches> branches_from_name(std::string_view name);

// Every training hyperparameter plus the architecture/ablation switches.
// Defaults are the reference configuration.
struct TrainConfig {
  // Embeddings.
  int d_x = 128;  // character embedding size
  int d_d = 128;  // dictionary feature embedding size

  // Left branch: n_r residual blocks, block i dilated by d_b^(i-1).
  int n_r = 2;
  int f_d = 256;  // filters per residual block
  int w_d = 2;    // dilated convolution window
  int d_b = 3;    // dilation base

  // Right branch: one standard convolution.
  int f_s = 256;  // filters
  int w_s = 3;    // window

  // Optimization.
  int batch = 128;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 10;
  std::uint64_t seed = 42;

  // Ablation switches.
  Branches branches = Branches::Both;
  bool residual = true;

  // Regularization / numerics.
  double char_dropout = 0.01;  // chance a char id trains as UNK
  double bn_momentum = 0.99;
  double bn_eps = 1e-3;
  double leaky_alpha = 0.01;
  int max_clause_len = 512;
};

// Throws on non-positive sizes/rates or inconsistent channel widths.
void validate_config(const TrainConfig& cfg);

}  // namespace rdcc
