#include "rdcc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rdcc/crf.hpp"
#include "rdcc/errors.hpp"
#include "rdcc/rng.hpp"
#include "rdcc/utf8.hpp"

namespace rdcc {

std::vector<PreparedClause> prepare_clauses(
    const std::vector<CorpusRecord>& corpus, const Lexicon& lexicon,
    const TrainConfig& cfg, const CharVocab& vocab) {
  std::vector<PreparedClause> out;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto& rec = corpus[r];
    const auto clauses = split_clauses(rec.text);
    const auto spans = spans_per_clause(clauses, rec.entities);
    for (std::size_t c = 0; c < clauses.size(); ++c) {
      const auto& clause = clauses[c];
      if (clause.chars.size() > static_cast<std::size_t>(cfg.max_clause_len))
        throw DataError("record " + std::to_string(r + 1) + " clause " +
                        std::to_string(c + 1) + " has " +
                        std::to_string(clause.chars.size()) +
                        " chars, over the cap of " +
                        std::to_string(cfg.max_clause_len));
      PreparedClause p;
      p.tags = encode_bieos(spans[c], clause.chars.size());
      p.char_ids.reserve(clause.chars.size());
      for (char32_t ch : clause.chars) p.char_ids.push_back(vocab.id(ch));
      for (const auto& f : dict_features(clause.chars, lexicon))
        p.feat_ids.push_back(dict_feature_id(f));
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Batch> make_batches(const std::vector<CorpusRecord>& corpus,
                                const Lexicon& lexicon,
                                const TrainConfig& cfg, std::uint64_t seed,
                                const CharVocab& vocab) {
  if (corpus.empty()) throw DataError("make_batches: empty corpus");
  if (cfg.batch < 1)
    throw std::invalid_argument("make_batches: batch size must be >= 1");
  auto clauses = prepare_clauses(corpus, lexicon, cfg, vocab);

  Rng rng(seed);
  std::vector<std::size_t> order(clauses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<Batch> batches;
  const std::size_t b = static_cast<std::size_t>(cfg.batch);
  for (std::size_t begin = 0; begin < order.size(); begin += b) {
    const std::size_t count = std::min(b, order.size() - begin);
    Batch batch;
    batch.size = static_cast<int>(count);
    std::size_t n_max = 0;
    for (std::size_t i = 0; i < count; ++i)
      n_max = std::max(n_max, clauses[order[begin + i]].char_ids.size());
    batch.n_max = static_cast<int>(n_max);
    batch.char_ids.assign(count * n_max, kPadId);
    batch.feat_ids.assign(count * n_max, kFeatPadId);
    batch.gold.assign(count * n_max, 0);
    batch.mask.assign(count * n_max, 0);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& cl = clauses[order[begin + i]];
      batch.lengths.push_back(static_cast<int>(cl.char_ids.size()));
      for (std::size_t t = 0; t < cl.char_ids.size(); ++t) {
        const std::size_t cell = i * n_max + t;
        int cid = cl.char_ids[t];
        if (cfg.char_dropout > 0.0 && rng.uniform() < cfg.char_dropout)
          cid = kUnkId;
        batch.char_ids[cell] = cid;
        batch.feat_ids[cell] = cl.feat_ids[t];
        batch.gold[cell] = cl.tags[t];
        batch.mask[cell] = 1;
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

AdamState make_adam_state(Model& model) {
  AdamState s;
  for (const auto& p : model.learnable()) {
    s.m.emplace_back(p.value->shape());
    s.v.emplace_back(p.value->shape());
  }
  return s;
}

void adam_update(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v,
                 long t, const TrainConfig& cfg) {
  if (!value.same_shape(grad) || !value.same_shape(m) || !value.same_shape(v))
    throw std::invalid_argument("adam_update: shape mismatch");
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
  double* vd = value.data();
  const double* gd = grad.data();
  double* md = m.data();
  double* sd = v.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    md[i] = b1 * md[i] + (1.0 - b1) * gd[i];
    sd[i] = b2 * sd[i] + (1.0 - b2) * gd[i] * gd[i];
    const double mhat = md[i] / corr1;
    const double vhat = sd[i] / corr2;
    vd[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
  }
}

void adam_step(Model& model, AdamState& state, const TrainConfig& cfg) {
  auto params = model.learnable();
  if (params.size() != state.m.size())
    throw std::invalid_argument("adam_step: state does not match model");
  for (const auto& p : params)
    if (!p.grad->all_finite())
      throw NumericError("adam_step: non-finite gradient in " + p.name +
                         ", step aborted");
  const long t = ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_update(*params[i].value, *params[i].grad, state.m[i], state.v[i], t,
                cfg);
}

double batch_loss_and_grad(Model& model, const Batch& batch) {
  // Gather real positions; padded cells never enter the network.
  std::vector<int> chars, feats;
  Ranges ranges;
  std::vector<std::vector<int>> gold(batch.size);
  for (int i = 0; i < batch.size; ++i) {
    const std::size_t off = chars.size();
    const int len = batch.lengths[i];
    for (int t = 0; t < len; ++t) {
      const std::size_t cell =
          static_cast<std::size_t>(i) * batch.n_max + static_cast<std::size_t>(t);
      chars.push_back(batch.char_ids[cell]);
      feats.push_back(batch.feat_ids[cell]);
      gold[i].push_back(batch.gold[cell]);
    }
    ranges.push_back({off, static_cast<std::size_t>(len)});
  }

  const Tensor e = embed(chars, feats, model.emb);
  EncoderCache cache;
  const Tensor scores =
      encoder_forward(model.enc, e, ranges, Mode::Train, &cache);

  const std::size_t k = static_cast<std::size_t>(model.tag_count());
  Tensor grad_scores({scores.dim(0), k});
  const double scale = 1.0 / static_cast<double>(batch.size);
  double loss_sum = 0.0;
  Tensor em, gem;
  for (int i = 0; i < batch.size; ++i) {
    const auto [off, len] = ranges[i];
    em = Tensor({len, k});
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < k; ++j) em(t, j) = scores(off + t, j);
    loss_sum += nll_and_grad(em, gold[i], model.trans, gem, model.gtrans, scale);
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < k; ++j) grad_scores(off + t, j) = gem(t, j);
  }

  const Tensor ge = encoder_backward(model.enc, cache, grad_scores);
  embed_backward(chars, feats, ge, model.emb);
  return loss_sum / static_cast<double>(batch.size);
}

TrainResult train(const std::vector<CorpusRecord>& corpus,
                  const Lexicon& lexicon, const TrainConfig& cfg) {
  validate_config(cfg);
  if (corpus.empty()) throw DataError("train: empty corpus");

  CharVocab vocab;
  for (const auto& rec : corpus)
    for (char32_t c : rec.text) vocab.add(c);

  TrainResult result{make_model(cfg, std::move(vocab)), {}};
  Model& model = result.model;
  AdamState adam = make_adam_state(model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = make_batches(corpus, lexicon, cfg,
                                      mix_seed(cfg.seed, epoch), model.vocab);
    double loss_sum = 0.0;
    std::size_t clause_count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      model.zero_grad();
      double mean_loss;
      try {
        mean_loss = batch_loss_and_grad(model, batches[b]);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
      if (!std::isfinite(mean_loss))
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(b + 1) + ": non-finite loss");
      adam_step(model, adam, cfg);
      loss_sum += mean_loss * batches[b].size;
      clause_count += static_cast<std::size_t>(batches[b].size);
    }
    const auto t1 = std::chrono::steady_clock::now();
    EpochStat stat;
    stat.epoch = epoch;
    stat.mean_loss = loss_sum / static_cast<double>(clause_count);
    stat.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.history.push_back(stat);
  }
  return result;
}

std::string history_to_csv(const std::vector<EpochStat>& history) {
  std::ostringstream out;
  out << "epoch,mean_loss,seconds\n";
  out.precision(10);
  for (const auto& h : history)
    out << h.epoch << ',' << h.mean_loss << ',' << h.seconds << '\n';
  return out.str();
}

std::vector<EntitySpan> predict(Model& model, const Lexicon& lexicon,
                                const std::u32string& text, bool constrained) {
  std::vector<EntitySpan> spans;
  TransitionMask mask;
  if (constrained) mask = bieos_transition_mask();
  for (const auto& clause : split_clauses(text)) {
    std::vector<int> chars, feats;
    chars.reserve(clause.chars.size());
    for (char32_t c : clause.chars) chars.push_back(model.vocab.id(c));
    for (const auto& f : dict_features(clause.chars, lexicon))
      feats.push_back(dict_feature_id(f));
    if (chars.empty()) continue;
    const Tensor e = embed(chars, feats, model.emb);
    const Tensor scores = encode(model.enc, e, Mode::Infer);
    const auto best =
        viterbi(scores, model.trans, constrained ? &mask : nullptr);
    for (auto span : decode_bieos(best.tags)) {
      span.start += clause.offset;
      span.end += clause.offset;
      spans.push_back(span);
    }
  }
  return spans;
}

}  // namespace rdcc
