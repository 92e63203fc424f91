#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdcc/corpus.hpp"
#include "rdcc/dictionary.hpp"
#include "rdcc/model.hpp"

namespace rdcc {

// One clause ready for batching: ids into the embedding tables plus gold
// tag ids, all of equal length.
struct PreparedClause {
  std::vector<int> char_ids;
  std::vector<int> feat_ids;
  std::vector<int> tags;
};

// Splits records into clauses, distributes gold spans, encodes tags and
// computes dictionary features. Rejects clauses longer than
// cfg.max_clause_len, naming the offending record.
std::vector<PreparedClause> prepare_clauses(
    const std::vector<CorpusRecord>& corpus, const Lexicon& lexicon,
    const TrainConfig& cfg, const CharVocab& vocab);

// Fixed-size padded batch. Cells with mask 0 carry PAD ids and contribute
// nothing to the loss, the gradients or the batch-norm statistics.
struct Batch {
  int size = 0;   // clauses
  int n_max = 0;  // padded length
  std::vector<int> char_ids;          // [size * n_max]
  std::vector<int> feat_ids;          // [size * n_max]
  std::vector<int> gold;              // [size * n_max]
  std::vector<std::uint8_t> mask;     // [size * n_max]
  std::vector<int> lengths;           // [size]
};

// Shuffles clauses with the seeded permutation for this epoch, applies the
// char-dropout that trains the UNK row, and packs batches of at most
// cfg.batch clauses padded to the per-batch maximum length.
std::vector<Batch> make_batches(const std::vector<CorpusRecord>& corpus,
                                const Lexicon& lexicon,
                                const TrainConfig& cfg, std::uint64_t seed,
                                const CharVocab& vocab);

// Adam moments, one pair per learnable parameter in Model::learnable()
// order, plus the shared step counter.
struct AdamState {
  std::vector<Tensor> m, v;
  long step = 0;
};

AdamState make_adam_state(Model& model);

// One Adam update with bias correction on a single parameter tensor.
void adam_update(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v,
                 long t, const TrainConfig& cfg);

// Applies Adam to every learnable parameter from its accumulated gradient.
// Aborts (without touching any parameter) if any gradient is non-finite.
void adam_step(Model& model, AdamState& state, const TrainConfig& cfg);

// Forward + backward over one batch: accumulates all parameter gradients
// (callers zero them first) and returns the mean per-clause CRF negative
// log likelihood.
double batch_loss_and_grad(Model& model, const Batch& batch);

struct EpochStat {
  int epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStat> history;
};

// Full training loop. Deterministic given cfg.seed; non-finite losses abort
// with the epoch and batch in the message.
TrainResult train(const std::vector<CorpusRecord>& corpus,
                  const Lexicon& lexicon, const TrainConfig& cfg);

// "epoch,mean_loss,seconds" CSV, one row per epoch.
std::string history_to_csv(const std::vector<EpochStat>& history);

// End-to-end tagging of one document: clause split, dictionary features,
// inference-mode encoding, Viterbi, span decoding, mapped back to document
// coordinates. Unseen characters become UNK. Inference does not mutate the
// model.
std::vector<EntitySpan> predict(Model& model, const Lexicon& lexicon,
                                const std::u32string& text,
                                bool constrained = false);

}  // namespace rdcc
