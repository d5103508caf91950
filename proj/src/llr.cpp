#include "hiret/llr.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "hiret/errors.hpp"
#include "hiret/ops.hpp"

namespace hiret {

void init_llr(ParameterStore& store, const EncoderDims& dims, Rng& rng) {
  init_text_encoder(store, TextLevel::kSentence, dims, rng);
}

double sentence_match(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("sentence_match: vectors of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return 1.0 / (1.0 + std::exp(-s));
}

std::vector<SentencePair> sample_sentence_pairs(const std::vector<CorpusSample>& samples, const Vocabulary& vocab,
                                                std::size_t count, Rng& rng) {
  std::vector<const CorpusSample*> multi;
  for (const auto& s : samples) {
    if (s.sentences.size() >= 2) multi.push_back(&s);
  }
  if (multi.empty() || samples.size() < 2) {
    throw ValidationError("sentence pairs need a report with two sentences and at least two reports");
  }
  std::vector<SentencePair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SentencePair p;
    if (i % 2 == 0) {
      const CorpusSample& r = *multi[rng.index(multi.size())];
      const std::size_t a = rng.index(r.sentences.size());
      std::size_t b = rng.index(r.sentences.size() - 1);
      if (b >= a) ++b;
      p.a = vocab.encode(r.sentences[a]);
      p.b = vocab.encode(r.sentences[b]);
      p.same = 1.0;
    } else {
      const std::size_t x = rng.index(samples.size());
      std::size_t y = rng.index(samples.size() - 1);
      if (y >= x) ++y;
      const auto& rx = samples[x].sentences;
      const auto& ry = samples[y].sentences;
      p.a = vocab.encode(rx[rng.index(rx.size())]);
      p.b = vocab.encode(ry[rng.index(ry.size())]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

Var llr_loss(Graph& g, const std::vector<SentencePair>& batch, const EncoderDims& dims) {
  if (batch.empty()) throw ValidationError("empty LLR batch");
  std::vector<Var> logits;
  Tensor targets({batch.size()});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Var a = encode_text(g, batch[i].a, TextLevel::kSentence, dims);
    Var b = encode_text(g, batch[i].b, TextLevel::kSentence, dims);
    logits.push_back(dot(a, b));
    targets[i] = batch[i].same;
  }
  return bce_with_logits(concat(logits, 0), targets);
}

double llr_pretrain_step(ParameterStore& store, Adam& adam, const std::vector<SentencePair>& batch,
                         const EncoderDims& dims) {
  store.zero_grad();
  Graph g(store);
  Var loss = llr_loss(g, batch, dims);
  g.backward(loss);
  adam.clip_and_step(store);
  return loss.item();
}

std::vector<double> train_llr(ParameterStore& store, Adam& adam, const std::vector<CorpusSample>& train,
                              const Vocabulary& vocab, const EncoderDims& dims, const LlrEpochOptions& options) {
  const double base = adam.options().lr;
  std::vector<double> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    adam.set_lr_factor(lr_schedule(epoch, base, options.schedule) / base);
    Rng rng(Rng::derive(options.seed, "llr-epoch:" + std::to_string(epoch)));
    auto pairs = sample_sentence_pairs(train, vocab, options.pairs_per_epoch, rng);
    rng.shuffle(pairs);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < pairs.size(); start += options.batch) {
      const std::size_t len = std::min(options.batch, pairs.size() - start);
      std::vector<SentencePair> batch(pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                      pairs.begin() + static_cast<std::ptrdiff_t>(start + len));
      total += llr_pretrain_step(store, adam, batch, dims);
      ++batches;
    }
    history.push_back(total / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, history.back());
  }
  adam.set_lr_factor(1.0);
  return history;
}

double evaluate_llr(ParameterStore& store, const std::vector<CorpusSample>& samples, const Vocabulary& vocab,
                    const EncoderDims& dims, std::uint64_t seed, std::size_t pairs) {
  Rng rng(Rng::derive(seed, "llr-eval"));
  const auto batch = sample_sentence_pairs(samples, vocab, pairs, rng);
  std::size_t correct = 0;
  for (const auto& p : batch) {
    Graph g(store, false);
    Var a = encode_text(g, p.a, TextLevel::kSentence, dims);
    Var b = encode_text(g, p.b, TextLevel::kSentence, dims);
    const bool predicted = sentence_match(a.value(), b.value()) > 0.5;
    correct += predicted == (p.same > 0.5) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

std::int64_t sentence_id(std::int64_t report_id, std::size_t index) {
  if (index >= static_cast<std::size_t>(kMaxSentencesPerReport)) {
    throw ValidationError("report " + std::to_string(report_id) + " has more than " +
                          std::to_string(kMaxSentencesPerReport) + " sentences");
  }
  return report_id * kMaxSentencesPerReport + static_cast<std::int64_t>(index);
}

SentenceBank::SentenceBank(const std::vector<CorpusSample>& train, ParameterStore& store, const Vocabulary& vocab,
                           const EncoderDims& dims)
    : dim_(dims.d) {
  std::vector<const CorpusSample*> order;
  for (const auto& s : train) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const CorpusSample* s : order) {
    for (std::size_t j = 0; j < s->sentences.size(); ++j) {
      auto tokens = vocab.encode(s->sentences[j]);
      if (tokens.empty()) continue;
      Graph g(store, false);
      Var e = encode_text(g, tokens, TextLevel::kSentence, dims);
      const std::int64_t id = sentence_id(s->id, j);
      index_.emplace(id, ids_.size());
      ids_.push_back(id);
      tokens_.push_back(std::move(tokens));
      embeddings_.insert(embeddings_.end(), e.value().begin(), e.value().end());
    }
  }
}

std::span<const double> SentenceBank::embedding(std::int64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("sentence " + std::to_string(id) + " is not in the bank");
  return {embeddings_.data() + it->second * dim_, dim_};
}

const std::vector<int>& SentenceBank::tokens(std::int64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("sentence " + std::to_string(id) + " is not in the bank");
  return tokens_[it->second];
}

RetrievalPool build_sentence_pool(const std::vector<Hit>& retrieved, const RetrievalPool& reports,
                                  const SentenceBank& bank) {
  if (retrieved.empty()) throw ValidationError("sentence pool needs at least one retrieved report");
  RetrievalPool pool(bank.dim());
  for (const Hit& h : retrieved) {
    const PoolEntry& report = reports.entry(h.index);
    for (std::size_t j = 0; j < report.sentences.size(); ++j) {
      const std::int64_t id = sentence_id(report.id, j);
      if (!bank.contains(id)) continue;
      pool.add({id, report.id, {bank.tokens(id)}}, bank.embedding(id));
    }
  }
  pool.freeze();
  return pool;
}

RetrievalPool build_global_sentence_pool(const SentenceBank& bank) {
  RetrievalPool pool(bank.dim());
  for (std::int64_t id : bank.ids()) pool.add({id, id / kMaxSentencesPerReport, {bank.tokens(id)}}, bank.embedding(id));
  pool.freeze();
  return pool;
}

std::vector<Hit> retrieve_sentences(std::span<const double> query, const RetrievalPool& pool, std::size_t k,
                                    std::optional<std::int64_t> exclude) {
  const std::size_t available = eligible_count(pool, exclude);
  if (available == 0) throw ValidationError("sentence pool is empty");
  if (k > available) {
    spdlog::warn("requested {} sentences from a pool of {}; returning all", k, available);
    k = available;
  }
  return top_k(pool, query, k, exclude);
}

MultiQueryResult sentence_template(Graph& g, Var anchor, Var retrieved, Var queries, const std::string& prefix) {
  return multi_query_attention(g, queries, anchor, retrieved, prefix);
}

}  // namespace hiret
