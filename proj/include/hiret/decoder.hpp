#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hiret/attention.hpp"
#include "hiret/corpus.hpp"
#include "hiret/llr.hpp"
#include "hiret/ops.hpp"
#include "hiret/retrieval.hpp"
#include "hiret/vlr.hpp"

namespace hiret {

// full: the complete model. no-vlrm: r_s is dropped and sentences are searched
// over every training sentence. no-llrm: the sentence templates u are dropped.
// no-hld: one flat word LSTM over the whole report.
enum class Variant { kFull, kNoVlrm, kNoLlrm, kNoHld };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);  // UsageError on unknown names
const std::vector<Variant>& all_variants();

struct DecoderConfig {
  std::size_t d = 64;  // must equal the encoders' d
  std::size_t hidden = 64;
  std::size_t attn = 64;
  std::size_t ffn = 64;
  std::size_t classes = 8;
  std::size_t views = 2;
  std::size_t vocab = 4;
  std::size_t keywords = 5;   // n
  std::size_t diseases = 5;   // m
  std::size_t reports = 5;    // k_r
  std::size_t sentences = 5;  // k_s
  // The word LSTM continues from the previous sentence's final state instead
  // of restarting from zeros.
  bool carry_word_state = true;
};

struct GenerationLimits {
  std::size_t max_sentences = 10;
  std::size_t max_words = 32;
};

inline constexpr const char* kDecoderPrefix = "dec.";

// All decoder parameters live under "dec.". "dec.h0" (the initial sentence
// state) is drawn once from the seeded initializer and never trained.
void init_decoder(ParameterStore& store, const DecoderConfig& cfg, Rng& rng);

// Everything the decoder reads from the two pretrained stages. Built once and
// read-only afterwards.
class FrozenModules {
 public:
  FrozenModules(ParameterStore& vlr, ParameterStore& llr, const VlrDims& dims, const Vocabulary& vocab,
                const KeywordDictionary& dictionary, const std::vector<CorpusSample>& train);

  ParameterStore& vlr() const { return *vlr_; }
  ParameterStore& llr() const { return *llr_; }
  const VlrDims& dims() const { return dims_; }
  const Vocabulary& vocab() const { return *vocab_; }
  const KeywordDictionary& dictionary() const { return *dictionary_; }
  const RetrievalPool& reports() const { return reports_; }
  const SentenceBank& bank() const { return bank_; }
  const std::shared_ptr<const RetrievalPool>& all_sentences() const { return all_sentences_; }

  // f_s of a token sequence (the frozen sentence encoder).
  std::vector<double> embed_sentence(const std::vector<int>& tokens) const;
  // Dictionary hits of token sentences as vocabulary ids, at most n.
  std::vector<int> keywords(const std::vector<std::vector<int>>& sentences, std::size_t n) const;

 private:
  ParameterStore* vlr_;
  ParameterStore* llr_;
  VlrDims dims_;
  const Vocabulary* vocab_;
  const KeywordDictionary* dictionary_;
  RetrievalPool reports_;
  SentenceBank bank_;
  std::shared_ptr<const RetrievalPool> all_sentences_;
};

struct SentenceRetrieval {
  std::vector<Hit> hits;
  Tensor values;              // [k, d] retrieved sentence embeddings
  std::vector<int> keywords;  // vocabulary ids, at most n
};

// Frozen per-sample inputs of the decoder: image features, predicted
// diseases, retrieved reports and the sentence pool to search.
struct SampleContext {
  std::int64_t sample_id = 0;
  std::vector<Tensor> maps;  // per view [k, k, d]
  Tensor c_pred;             // [C] logits
  Tensor v;                  // [d]
  std::vector<Hit> reports;
  Tensor report_values;  // [k_r, d]
  std::vector<int> report_keywords;
  std::vector<int> diseases;  // top-m by logit
  std::shared_ptr<const RetrievalPool> sentence_pool;
  std::optional<std::int64_t> exclude;  // the sample's own report during training
};

// With exclude_self the sample's own report never comes back from retrieval
// (stage-3 training); at test time nothing is excluded.
SampleContext build_context(const FrozenModules& frozen, const CorpusSample& sample, const DecoderConfig& cfg,
                            Variant variant, bool exclude_self);

// k_s sentences for the sentence just written, by p_ll.
SentenceRetrieval retrieve_for_sentence(const FrozenModules& frozen, const SampleContext& ctx,
                                        const std::vector<int>& sentence, const DecoderConfig& cfg);

// Graph-side constants and per-sample precomputations.
struct DecoderInputs {
  std::vector<Var> maps;
  std::vector<Var> cells_s;  // per view, Wv of the sentence-level attention applied to every cell
  std::vector<Var> cells_w;
  Var c_pred;
  Var r_s;                   // zero for no-vlrm
  Var report_weights;        // [n+m, k_r] (invalid for no-vlrm)
  Var zero_d;
  Var zero_h;
};
DecoderInputs decoder_inputs(Graph& g, const SampleContext& ctx, const DecoderConfig& cfg, Variant variant);

// Values and queries of one sentence retrieval, shared by u^s and every u^w
// of the following sentence.
struct TemplateInputs {
  MultiQueryValues values;
  Var queries;  // [n+m, d]
};
TemplateInputs template_inputs(Graph& g, const SentenceRetrieval& retrieval, const SampleContext& ctx,
                               const DecoderConfig& cfg);
// u = multi-query attention over the retrieved sentences with the projected
// hidden state as anchor; `level` is "s" or "w".
MultiQueryResult sentence_template_vector(Graph& g, const TemplateInputs& inputs, Var hidden, const char* level);

struct SentenceStep {
  LstmState state;
  std::vector<Var> alphas;  // per view [k*k]
};
// h^s_t = LSTM_s(concat(v^s, u_{t-1}, r_s), h^s_{t-1}); v^s attends with the
// condition concat(h^s_{t-1}, c_pred).
SentenceStep sentence_step(Graph& g, const DecoderInputs& in, const LstmState& prev, Var u_prev);

struct WordStep {
  LstmState state;
  Var logits;  // [V]
  std::vector<Var> alphas;
};
// h^w_i = LSTM_w(concat(emb(w_i), h^s_t, u^w, v^w, r_s), h^w_{i-1}) and
// FFN(h^w_i). The previous word's embedding is also an input.
WordStep word_step(Graph& g, const DecoderInputs& in, Var hs, const LstmState& prev, int prev_token, Var u_word);

// (dec.h0, 0) for the sentence LSTM; zeros for the word LSTM.
LstmState initial_sentence_state(Graph& g, const DecoderInputs& in);
LstmState zero_state(const DecoderInputs& in);

// Ground truth with the frozen retrieval it induces under teacher forcing.
struct TeacherSample {
  SampleContext ctx;
  std::vector<std::vector<int>> sentences;
  std::vector<SentenceRetrieval> after;  // after[t]: retrieval keyed by ground-truth sentence t
};
TeacherSample make_teacher_sample(const FrozenModules& frozen, const CorpusSample& sample, const DecoderConfig& cfg,
                                  Variant variant, const GenerationLimits& limits);

// Counters proving which inputs a path touched.
struct DecoderProbe {
  std::size_t first_sentence_template_reads = 0;
  std::size_t first_sentence_retrievals = 0;
};

// Mean cross-entropy over every ground-truth token (each sentence's words and
// END, then the empty sentence that ends the report).
Var teacher_forced_loss(Graph& g, const TeacherSample& sample, const DecoderConfig& cfg, Variant variant,
                        const GenerationLimits& limits, DecoderProbe* probe = nullptr);

struct GeneratedReport {
  std::int64_t sample_id = 0;
  std::vector<std::vector<int>> sentences;
  std::vector<std::int64_t> retrieved_reports;
  std::vector<std::vector<std::int64_t>> retrieved_sentences;  // per written sentence
  std::vector<std::vector<std::vector<double>>> sentence_attention;  // [sentence][view][k*k]
  std::vector<std::vector<double>> report_attention;                 // [n+m][k_r]
  std::size_t tokens_emitted = 0;  // including END tokens
};

// Greedy decoding. Terminates on the empty sentence, after max_sentences or,
// for no-hld, after max_sentences * max_words tokens.
GeneratedReport generate_report(ParameterStore& decoder, const FrozenModules& frozen, const CorpusSample& sample,
                                const DecoderConfig& cfg, Variant variant, const GenerationLimits& limits,
                                DecoderProbe* probe = nullptr);

struct DecoderEpochOptions {
  int epochs = 1;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  LrSchedule schedule;
  std::function<void(int epoch, double loss)> on_epoch;
};

double decoder_train_step(ParameterStore& store, Adam& adam, const std::vector<const TeacherSample*>& batch,
                          const DecoderConfig& cfg, Variant variant, const GenerationLimits& limits);
std::vector<double> train_decoder(ParameterStore& store, Adam& adam, const std::vector<TeacherSample>& train,
                                  const DecoderConfig& cfg, Variant variant, const GenerationLimits& limits,
                                  const DecoderEpochOptions& options);

}  // namespace hiret
