#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiret/attention.hpp"
#include "hiret/corpus.hpp"
#include "hiret/encoders.hpp"
#include "hiret/optim.hpp"
#include "hiret/retrieval.hpp"

namespace hiret {

struct VlrDims {
  EncoderDims enc;
  std::size_t classes = 8;
  std::size_t views = 2;
  std::size_t attn = 64;  // hidden width of the spatial attention scorer
};

// Image-side parameters live under "enc.img." and "vlr."; the report encoder
// under "enc.rep." plus the shared token table.
inline constexpr const char* kVlrPrefix = "vlr.";
inline constexpr const char* kVlrAttention = "vlr.att.";
inline constexpr const char* kVlrFusion = "vlr.fuse.";

void init_vlr(ParameterStore& store, const VlrDims& dims, Rng& rng);

// Sum over views of the spatially pooled maps, through the classifier:
// c_pred = W_cls sum_i AvgPool(v_i) + b_cls (logits; probabilities are the
// elementwise sigmoid).
Var disease_logits(Graph& g, std::span<const Var> maps);

struct ImageContext {
  std::vector<Var> maps;    // b maps of [k, k, d]
  Var c_pred;               // [C] logits
  std::vector<Var> alphas;  // per view, [k*k]
  Var v;                    // fused image vector [d]
};

// Encodes every view, predicts diseases, attends each view conditioned on
// c_pred and fuses the attended vectors.
ImageContext vlr_image_forward(Graph& g, const std::vector<Tensor>& views, const VlrDims& dims);

// p_vl = sigmoid(r^T v).
double match_score(std::span<const double> v, std::span<const double> r);

std::vector<int> report_tokens(const CorpusSample& sample, const Vocabulary& vocab);
Tensor multi_hot(const std::vector<int>& labels, std::size_t classes);

struct VlrItem {
  const CorpusSample* image = nullptr;  // views and labels
  std::vector<int> report;              // token ids of the paired report
  double matched = 1.0;
};

// Pairs each sample with its own report or, with probability 1/2, with the
// report of another sample of the same batch.
std::vector<VlrItem> make_vlr_batch(std::span<const CorpusSample* const> samples, const Vocabulary& vocab, Rng& rng);

struct VlrLoss {
  Var total;
  double disease = 0.0;  // mean BCE of the classifier
  double match = 0.0;    // mean BCE of image-report matching
};
VlrLoss vlr_loss(Graph& g, const std::vector<VlrItem>& batch, const VlrDims& dims);

// One optimizer step on the batch; returns (loss_dc, loss_vl).
std::pair<double, double> vlr_pretrain_step(ParameterStore& store, Adam& adam, const std::vector<VlrItem>& batch,
                                            const VlrDims& dims);

struct EpochOptions {
  int epochs = 1;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  LrSchedule schedule;
  std::function<void(int epoch, double loss)> on_epoch;
};

// Seeded shuffling per epoch; returns the mean training loss of each epoch.
std::vector<double> train_vlr(ParameterStore& store, Adam& adam, const std::vector<CorpusSample>& train,
                              const Vocabulary& vocab, const VlrDims& dims, const EpochOptions& options);

struct VlrEval {
  double match_accuracy = 0.0;  // balanced matched / swapped pairs, threshold 0.5
  double disease_auc = 0.0;     // macro AUC of sigmoid(c_pred)
};
VlrEval evaluate_vlr(ParameterStore& store, const std::vector<CorpusSample>& samples, const Vocabulary& vocab,
                     const VlrDims& dims, std::uint64_t seed);

// One entry per report with its f_l embedding, ordered by id.
RetrievalPool build_report_pool(const std::vector<CorpusSample>& train, ParameterStore& store,
                                const Vocabulary& vocab, const VlrDims& dims);

// Exact top-k_r by p_vl; `exclude` removes the query subject's own report.
std::vector<Hit> retrieve_reports(std::span<const double> v, const RetrievalPool& pool, std::size_t k,
                                  std::optional<std::int64_t> exclude = std::nullopt);

// Case-insensitive dictionary hits across the reports, top n by count with
// ties in dictionary order. Words with no hit are not returned.
std::vector<std::string> extract_keywords(const std::vector<std::vector<Sentence>>& reports,
                                          const KeywordDictionary& dictionary, std::size_t n);

// Indices of the m largest logits, ties by lower index.
std::vector<int> top_diseases(std::span<const double> logits, std::size_t m);

// Query matrix [n + m, d]: keyword embeddings (zero rows pad up to n) then the
// disease embeddings.
Var query_set(Graph& g, Var keyword_table, const std::vector<int>& keyword_ids, std::size_t n, Var disease_table,
              const std::vector<int>& diseases);

// r_s = multi-query attention with the image vector as anchor over the
// retrieved report embeddings [k_r, d].
MultiQueryResult report_template(Graph& g, Var v, Var retrieved, Var queries, const std::string& prefix);

// JSON lines {id, embedding, tokens}.
void write_report_pool(const std::filesystem::path& path, const RetrievalPool& pool, const Vocabulary& vocab);

}  // namespace hiret
