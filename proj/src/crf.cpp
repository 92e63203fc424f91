#include "rdcc/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rdcc/errors.hpp"

namespace rdcc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(const Tensor& emissions, const Tensor& transitions) {
  if (emissions.rank() != 2 || emissions.dim(0) == 0)
    throw std::invalid_argument("crf: emissions must be [n >= 1, K], got " +
                                emissions.shape_str());
  const std::size_t k = emissions.dim(1);
  if (transitions.rank() != 2 || transitions.dim(0) != k + 1 ||
      transitions.dim(1) != k)
    throw std::invalid_argument("crf: transitions must be [K+1, K] = [" +
                                std::to_string(k + 1) + ", " +
                                std::to_string(k) + "], got " +
                                transitions.shape_str());
}

double logsumexp(const double* v, std::size_t k) {
  double hi = kNegInf;
  for (std::size_t i = 0; i < k; ++i) hi = std::max(hi, v[i]);
  if (!std::isfinite(hi)) return hi;  // all -inf (or a NaN propagates)
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::exp(v[i] - hi);
  return hi + std::log(s);
}

// Forward/backward log-potentials; alpha[t*K+j] includes emissions[t, j],
// beta[t*K+i] excludes everything at t itself.
struct ForwardBackward {
  std::vector<double> alpha, beta;
  double log_z;
};

ForwardBackward forward_backward(const Tensor& em, const Tensor& a) {
  const std::size_t n = em.dim(0), k = em.dim(1);
  ForwardBackward fb;
  fb.alpha.resize(n * k);
  fb.beta.assign(n * k, 0.0);
  const std::size_t start = crf_start_row(k);
  std::vector<double> tmp(k);
  for (std::size_t j = 0; j < k; ++j)
    fb.alpha[j] = a(start, j) + em(0, j);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i)
        tmp[i] = fb.alpha[(t - 1) * k + i] + a(i, j);
      fb.alpha[t * k + j] = logsumexp(tmp.data(), k) + em(t, j);
    }
  }
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j)
        tmp[j] = a(i, j) + em(t + 1, j) + fb.beta[(t + 1) * k + j];
      fb.beta[t * k + i] = logsumexp(tmp.data(), k);
    }
  }
  fb.log_z = logsumexp(fb.alpha.data() + (n - 1) * k, k);
  return fb;
}

}  // namespace

double score_path(const Tensor& emissions, std::span<const int> tags,
                  const Tensor& transitions) {
  check_inputs(emissions, transitions);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  if (tags.size() != n)
    throw std::invalid_argument("crf: path length " +
                                std::to_string(tags.size()) +
                                " does not match emissions rows " +
                                std::to_string(n));
  for (int t : tags)
    if (t < 0 || static_cast<std::size_t>(t) >= k)
      throw std::invalid_argument("crf: tag index " + std::to_string(t) +
                                  " out of range [0, " + std::to_string(k) +
                                  ")");
  double s = transitions(crf_start_row(k), tags[0]) + emissions(0, tags[0]);
  for (std::size_t t = 1; t < n; ++t)
    s += transitions(tags[t - 1], tags[t]) + emissions(t, tags[t]);
  return s;
}

double log_partition(const Tensor& emissions, const Tensor& transitions) {
  check_inputs(emissions, transitions);
  return forward_backward(emissions, transitions).log_z;
}

Marginals crf_marginals(const Tensor& emissions, const Tensor& transitions) {
  check_inputs(emissions, transitions);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  const auto fb = forward_backward(emissions, transitions);
  Marginals m;
  m.log_z = fb.log_z;
  m.unary = Tensor({n, k});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < k; ++j)
      m.unary(t, j) = std::exp(fb.alpha[t * k + j] + fb.beta[t * k + j] -
                               fb.log_z);
  return m;
}

double nll_and_grad(const Tensor& emissions, std::span<const int> gold,
                    const Tensor& transitions, Tensor& grad_emissions,
                    Tensor& grad_transitions, double scale) {
  check_inputs(emissions, transitions);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  const double gold_score = score_path(emissions, gold, transitions);
  const auto fb = forward_backward(emissions, transitions);
  const double loss = fb.log_z - gold_score;
  if (!std::isfinite(loss))
    throw NumericError("crf: non-finite loss (log Z = " +
                       std::to_string(fb.log_z) + ")");

  if (!grad_emissions.same_shape(emissions)) grad_emissions = Tensor({n, k});
  const std::size_t start = crf_start_row(k);

  // Unary marginals minus gold indicators.
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(fb.alpha[t * k + j] + fb.beta[t * k + j] -
                                fb.log_z);
      grad_emissions(t, j) =
          scale * (p - (gold[t] == static_cast<int>(j) ? 1.0 : 0.0));
    }
  }

  // Expected transition counts minus observed ones. The start row uses the
  // unary marginal at t = 0.
  for (std::size_t j = 0; j < k; ++j) {
    const double p = std::exp(fb.alpha[j] + fb.beta[j] - fb.log_z);
    grad_transitions(start, j) +=
        scale * (p - (gold[0] == static_cast<int>(j) ? 1.0 : 0.0));
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      const double left = fb.alpha[t * k + i];
      for (std::size_t j = 0; j < k; ++j) {
        const double p =
            std::exp(left + transitions(i, j) + emissions(t + 1, j) +
                     fb.beta[(t + 1) * k + j] - fb.log_z);
        const bool observed = gold[t] == static_cast<int>(i) &&
                              gold[t + 1] == static_cast<int>(j);
        grad_transitions(i, j) += scale * (p - (observed ? 1.0 : 0.0));
      }
    }
  }
  return loss;
}

ViterbiResult viterbi(const Tensor& emissions, const Tensor& transitions,
                      const TransitionMask* mask) {
  check_inputs(emissions, transitions);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  if (mask != nullptr && mask->num_tags != k)
    throw std::invalid_argument("crf: mask is over " +
                                std::to_string(mask->num_tags) +
                                " tags, emissions over " + std::to_string(k));
  const std::size_t start = crf_start_row(k);

  auto trans = [&](std::size_t i, std::size_t j) {
    if (mask != nullptr && !mask->at(i, j)) return kNegInf;
    return transitions(i, j);
  };

  std::vector<double> score(k), next(k);
  std::vector<int> history((n - 1) * k, 0);
  for (std::size_t j = 0; j < k; ++j)
    score[j] = trans(start, j) + emissions(0, j);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      double best = kNegInf;
      int best_i = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const double s = score[i] + trans(i, j);
        if (s > best) {
          best = s;
          best_i = static_cast<int>(i);
        }
      }
      next[j] = best + emissions(t, j);
      history[(t - 1) * k + j] = best_i;
    }
    score.swap(next);
  }

  double best = kNegInf;
  int last = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (score[j] > best) {
      best = score[j];
      last = static_cast<int>(j);
    }
  }
  if (!std::isfinite(best))
    throw NumericError(
        "crf: no admissible path (all transitions are -inf under the mask)");

  ViterbiResult r;
  r.score = best;
  r.tags.assign(n, 0);
  r.tags[n - 1] = last;
  for (std::size_t t = n - 1; t-- > 0;)
    r.tags[t] = history[t * k + r.tags[t + 1]];
  return r;
}

}  // namespace rdcc
