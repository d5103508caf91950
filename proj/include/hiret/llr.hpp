#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiret/attention.hpp"
#include "hiret/corpus.hpp"
#include "hiret/encoders.hpp"
#include "hiret/optim.hpp"
#include "hiret/retrieval.hpp"
#include "hiret/vlr.hpp"

namespace hiret {

// Sentence encoder parameters ("enc.sent.", including its own token table).
void init_llr(ParameterStore& store, const EncoderDims& dims, Rng& rng);

// p_ll = sigmoid(s_i^T s_j). Exactly symmetric.
double sentence_match(std::span<const double> a, std::span<const double> b);

struct SentencePair {
  std::vector<int> a;
  std::vector<int> b;
  double same = 0.0;  // 1 when both come from one report
};

// Half positives (two distinct sentences of one report), half negatives (one
// sentence from each of two different reports). Pairs are unordered.
std::vector<SentencePair> sample_sentence_pairs(const std::vector<CorpusSample>& samples, const Vocabulary& vocab,
                                                std::size_t count, Rng& rng);

Var llr_loss(Graph& g, const std::vector<SentencePair>& batch, const EncoderDims& dims);
double llr_pretrain_step(ParameterStore& store, Adam& adam, const std::vector<SentencePair>& batch,
                         const EncoderDims& dims);

struct LlrEpochOptions : EpochOptions {
  std::size_t pairs_per_epoch = 2000;
};
std::vector<double> train_llr(ParameterStore& store, Adam& adam, const std::vector<CorpusSample>& train,
                              const Vocabulary& vocab, const EncoderDims& dims, const LlrEpochOptions& options);

// Accuracy of p_ll > 0.5 on freshly sampled balanced pairs.
double evaluate_llr(ParameterStore& store, const std::vector<CorpusSample>& samples, const Vocabulary& vocab,
                    const EncoderDims& dims, std::uint64_t seed, std::size_t pairs);

// Sentence j of report r has id r * 64 + j.
inline constexpr std::int64_t kMaxSentencesPerReport = 64;
std::int64_t sentence_id(std::int64_t report_id, std::size_t index);

// f_s embeddings of every training sentence, computed once with the frozen
// encoder.
class SentenceBank {
 public:
  SentenceBank() = default;
  SentenceBank(const std::vector<CorpusSample>& train, ParameterStore& store, const Vocabulary& vocab,
               const EncoderDims& dims);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool contains(std::int64_t id) const { return index_.contains(id); }
  std::span<const double> embedding(std::int64_t id) const;
  const std::vector<int>& tokens(std::int64_t id) const;
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::int64_t> ids_;
  std::vector<std::vector<int>> tokens_;
  std::vector<double> embeddings_;
  std::map<std::int64_t, std::size_t> index_;
};

// The candidate sentences of the retrieved reports, in retrieval order.
RetrievalPool build_sentence_pool(const std::vector<Hit>& retrieved, const RetrievalPool& reports,
                                  const SentenceBank& bank);
// Every training sentence (used when report retrieval is ablated).
RetrievalPool build_global_sentence_pool(const SentenceBank& bank);

// Exact top-k_s by p_ll. k larger than the pool is clamped with a warning.
// `exclude` drops the sentences of one report (the query subject's own, when
// searching the global pool during training).
std::vector<Hit> retrieve_sentences(std::span<const double> query, const RetrievalPool& pool, std::size_t k,
                                    std::optional<std::int64_t> exclude = std::nullopt);

// u = multi-query attention with `anchor` (the projected hidden state) over
// the retrieved sentence embeddings.
MultiQueryResult sentence_template(Graph& g, Var anchor, Var retrieved, Var queries, const std::string& prefix);

}  // namespace hiret
