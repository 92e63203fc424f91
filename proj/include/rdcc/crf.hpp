#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rdcc/tensor.hpp"

namespace rdcc {

// Linear-chain CRF over K tags. The transition matrix A has shape [K+1, K]:
// A(i, j) scores moving from tag i to tag j, and the extra row K scores the
// initial transition from a virtual start state into the first tag. There is
// no end transition.
inline constexpr std::size_t crf_start_row(std::size_t num_tags) {
  return num_tags;
}

// Allowed-transition mask over the same [K+1, K] layout as A. Entries set to
// false are forced to -inf before decoding.
struct TransitionMask {
  std::size_t num_tags = 0;
  std::vector<std::uint8_t> allowed;  // [(K+1) * K]

  bool at(std::size_t from, std::size_t to) const {
    return allowed[from * num_tags + to] != 0;
  }
  void set(std::size_t from, std::size_t to, bool value) {
    allowed[from * num_tags + to] = value ? 1 : 0;
  }
  static TransitionMask all_allowed(std::size_t num_tags) {
    TransitionMask m;
    m.num_tags = num_tags;
    m.allowed.assign((num_tags + 1) * num_tags, 1);
    return m;
  }
};

// Score of one tag path: initial transition + pairwise transitions + the
// emission picked at every position.
double score_path(const Tensor& emissions, std::span<const int> tags,
                  const Tensor& transitions);

// log sum over all K^n paths of exp(score_path), via the forward recursion
// in log space.
double log_partition(const Tensor& emissions, const Tensor& transitions);

// Per-position posterior marginals P(y_t = k) plus the log partition.
struct Marginals {
  double log_z = 0.0;
  Tensor unary;  // [n, K]
};
Marginals crf_marginals(const Tensor& emissions, const Tensor& transitions);

// Negative log likelihood of the gold path and its exact gradients.
// grad_emissions is assigned (shape [n, K]); grad_transitions is
// accumulated into (shape [K+1, K]), both scaled by `scale`.
double nll_and_grad(const Tensor& emissions, std::span<const int> gold,
                    const Tensor& transitions, Tensor& grad_emissions,
                    Tensor& grad_transitions, double scale = 1.0);

struct ViterbiResult {
  std::vector<int> tags;
  double score = 0.0;
};

// Max-sum decoding. Ties break toward the lower tag index at every
// backpointer decision and at the final position. A mask, when given,
// replaces disallowed transitions with -inf; throws NumericError if that
// leaves no admissible path.
ViterbiResult viterbi(const Tensor& emissions, const Tensor& transitions,
                      const TransitionMask* mask = nullptr);

}  // namespace rdcc
