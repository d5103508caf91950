#include "hiret/vlr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"

#include "hiret/errors.hpp"
#include "hiret/metrics.hpp"
#include "hiret/ops.hpp"

namespace hiret {

void init_vlr(ParameterStore& store, const VlrDims& dims, Rng& rng) {
  init_image_encoder(store, dims.enc, rng);
  init_text_encoder(store, TextLevel::kReport, dims.enc, rng);
  store.add_weight("vlr.cls.W", dims.classes, dims.enc.d, rng);
  store.add_zeros("vlr.cls.b", {dims.classes});
  init_spatial_attention(store, kVlrAttention, dims.enc.d, dims.classes, dims.attn, rng);
  init_view_fusion(store, kVlrFusion, dims.enc.d, dims.views, rng);
}

Var disease_logits(Graph& g, std::span<const Var> maps) {
  if (maps.empty()) throw ValidationError("disease_logits: no views");
  Var pooled = avg_pool_spatial(maps[0]);
  for (std::size_t i = 1; i < maps.size(); ++i) pooled = add(pooled, avg_pool_spatial(maps[i]));
  return linear(pooled, g.param("vlr.cls.W"), g.param("vlr.cls.b"));
}

ImageContext vlr_image_forward(Graph& g, const std::vector<Tensor>& views, const VlrDims& dims) {
  if (views.size() != dims.views) {
    throw ValidationError("expected " + std::to_string(dims.views) + " views, got " + std::to_string(views.size()));
  }
  ImageContext ctx;
  for (const auto& view : views) ctx.maps.push_back(encode_image(g, view, dims.enc));
  ctx.c_pred = disease_logits(g, ctx.maps);
  std::vector<Var> attended;
  for (const Var& map : ctx.maps) {
    auto att = spatial_attention(g, map, ctx.c_pred, kVlrAttention);
    ctx.alphas.push_back(att.alpha);
    attended.push_back(att.attended);
  }
  ctx.v = fuse_views(g, attended, kVlrFusion, dims.views);
  return ctx;
}

double match_score(std::span<const double> v, std::span<const double> r) {
  if (v.size() != r.size()) throw DimensionError("match_score: vectors of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += r[i] * v[i];
  return 1.0 / (1.0 + std::exp(-s));
}

std::vector<int> report_tokens(const CorpusSample& sample, const Vocabulary& vocab) {
  std::vector<int> out;
  for (const auto& s : sample.sentences) {
    const auto ids = vocab.encode(s);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  if (out.empty()) throw ValidationError("sample " + std::to_string(sample.id) + " has an empty report");
  return out;
}

Tensor multi_hot(const std::vector<int>& labels, std::size_t classes) {
  Tensor t({classes});
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      throw ValidationError("label " + std::to_string(c) + " outside " + std::to_string(classes) + " classes");
    }
    t[static_cast<std::size_t>(c)] = 1.0;
  }
  return t;
}

std::vector<VlrItem> make_vlr_batch(std::span<const CorpusSample* const> samples, const Vocabulary& vocab,
                                    Rng& rng) {
  std::vector<VlrItem> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    VlrItem item;
    item.image = samples[i];
    std::size_t partner = i;
    if (samples.size() > 1 && rng.bernoulli(0.5)) {
      partner = rng.index(samples.size() - 1);
      if (partner >= i) ++partner;
      item.matched = 0.0;
    }
    item.report = report_tokens(*samples[partner], vocab);
    out.push_back(std::move(item));
  }
  return out;
}

VlrLoss vlr_loss(Graph& g, const std::vector<VlrItem>& batch, const VlrDims& dims) {
  if (batch.empty()) throw ValidationError("empty VLR batch");
  std::vector<Var> disease_terms;
  std::vector<Var> match_logits;
  Tensor match_targets({batch.size()});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const VlrItem& item = batch[i];
    ImageContext ctx = vlr_image_forward(g, item.image->views, dims);
    disease_terms.push_back(bce_with_logits(ctx.c_pred, multi_hot(item.image->labels, dims.classes)));
    Var r = encode_text(g, item.report, TextLevel::kReport, dims.enc);
    match_logits.push_back(dot(r, ctx.v));
    match_targets[i] = item.matched;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  Var disease = scale(sum(concat(disease_terms, 0)), inv);
  Var match = bce_with_logits(concat(match_logits, 0), match_targets);
  return {add(disease, match), disease.item(), match.item()};
}

std::pair<double, double> vlr_pretrain_step(ParameterStore& store, Adam& adam, const std::vector<VlrItem>& batch,
                                            const VlrDims& dims) {
  store.zero_grad();
  Graph g(store);
  VlrLoss loss = vlr_loss(g, batch, dims);
  g.backward(loss.total);
  adam.clip_and_step(store);
  return {loss.disease, loss.match};
}

std::vector<double> train_vlr(ParameterStore& store, Adam& adam, const std::vector<CorpusSample>& train,
                              const Vocabulary& vocab, const VlrDims& dims, const EpochOptions& options) {
  if (train.empty()) throw ValidationError("VLR training split is empty");
  const double base = adam.options().lr;
  std::vector<const CorpusSample*> order;
  for (const auto& s : train) order.push_back(&s);
  std::vector<double> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    adam.set_lr_factor(lr_schedule(epoch, base, options.schedule) / base);
    Rng rng(Rng::derive(options.seed, "vlr-epoch:" + std::to_string(epoch)));
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      const std::size_t len = std::min(options.batch, order.size() - start);
      auto batch = make_vlr_batch(std::span(order).subspan(start, len), vocab, rng);
      auto [dc, vl] = vlr_pretrain_step(store, adam, batch, dims);
      total += dc + vl;
      ++batches;
    }
    history.push_back(total / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, history.back());
  }
  adam.set_lr_factor(1.0);
  return history;
}

VlrEval evaluate_vlr(ParameterStore& store, const std::vector<CorpusSample>& samples, const Vocabulary& vocab,
                     const VlrDims& dims, std::uint64_t seed) {
  if (samples.size() < 2) throw ValidationError("VLR evaluation needs at least two samples");
  std::vector<std::vector<double>> images;
  std::vector<std::vector<double>> reports;
  std::vector<std::vector<double>> logits;
  for (const auto& s : samples) {
    Graph g(store, false);
    ImageContext ctx = vlr_image_forward(g, s.views, dims);
    Var r = encode_text(g, report_tokens(s, vocab), TextLevel::kReport, dims.enc);
    images.emplace_back(ctx.v.value().begin(), ctx.v.value().end());
    reports.emplace_back(r.value().begin(), r.value().end());
    logits.emplace_back(ctx.c_pred.value().begin(), ctx.c_pred.value().end());
  }
  Rng rng(Rng::derive(seed, "vlr-eval"));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::size_t other = rng.index(samples.size() - 1);
    if (other >= i) ++other;
    correct += match_score(images[i], reports[i]) > 0.5 ? 1 : 0;
    correct += match_score(images[i], reports[other]) < 0.5 ? 1 : 0;
  }
  VlrEval out;
  out.match_accuracy = static_cast<double>(correct) / (2.0 * static_cast<double>(samples.size()));
  double auc_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < dims.classes; ++c) {
    std::vector<double> scores;
    std::vector<int> truth;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      scores.push_back(logits[i][c]);
      const auto& l = samples[i].labels;
      truth.push_back(std::find(l.begin(), l.end(), static_cast<int>(c)) != l.end() ? 1 : 0);
    }
    const auto pos = std::count(truth.begin(), truth.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(truth.size())) continue;
    auc_sum += roc_auc(scores, truth);
    ++used;
  }
  out.disease_auc = used == 0 ? 0.0 : auc_sum / static_cast<double>(used);
  return out;
}

RetrievalPool build_report_pool(const std::vector<CorpusSample>& train, ParameterStore& store,
                                const Vocabulary& vocab, const VlrDims& dims) {
  if (train.empty()) throw ValidationError("cannot build a report pool from an empty corpus");
  std::vector<const CorpusSample*> order;
  for (const auto& s : train) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  RetrievalPool pool(dims.enc.d);
  for (const CorpusSample* s : order) {
    Graph g(store, false);
    Var r = encode_text(g, report_tokens(*s, vocab), TextLevel::kReport, dims.enc);
    PoolEntry e;
    e.id = s->id;
    e.source = s->id;
    for (const auto& sent : s->sentences) e.sentences.push_back(vocab.encode(sent));
    pool.add(std::move(e), r.value());
  }
  pool.freeze();
  return pool;
}

std::vector<Hit> retrieve_reports(std::span<const double> v, const RetrievalPool& pool, std::size_t k,
                                  std::optional<std::int64_t> exclude) {
  return top_k(pool, v, k, exclude);
}

std::vector<std::string> extract_keywords(const std::vector<std::vector<Sentence>>& reports,
                                          const KeywordDictionary& dictionary, std::size_t n) {
  if (dictionary.words.empty()) throw ValidationError("keyword dictionary is empty");
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < dictionary.words.size(); ++i) position.emplace(to_lower(dictionary.words[i]), i);
  std::vector<std::size_t> counts(dictionary.words.size(), 0);
  for (const auto& report : reports)
    for (const auto& sentence : report)
      for (const auto& token : sentence) {
        auto it = position.find(to_lower(token));
        if (it != position.end()) ++counts[it->second];
      }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < order.size() && i < n; ++i) out.push_back(dictionary.words[order[i]]);
  return out;
}

std::vector<int> top_diseases(std::span<const double> logits, std::size_t m) {
  std::vector<int> idx(logits.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
  });
  idx.resize(std::min(m, idx.size()));
  return idx;
}

Var query_set(Graph& g, Var keyword_table, const std::vector<int>& keyword_ids, std::size_t n, Var disease_table,
              const std::vector<int>& diseases) {
  const std::size_t d = keyword_table.shape().at(1);
  if (keyword_ids.size() > n) throw ValidationError("more keywords than query slots");
  std::vector<Var> parts;
  if (!keyword_ids.empty()) parts.push_back(gather_rows(keyword_table, keyword_ids));
  if (keyword_ids.size() < n) parts.push_back(g.constant(Tensor({n - keyword_ids.size(), d})));
  if (!diseases.empty()) parts.push_back(gather_rows(disease_table, diseases));
  return concat(parts, 0);
}

MultiQueryResult report_template(Graph& g, Var v, Var retrieved, Var queries, const std::string& prefix) {
  return multi_query_attention(g, queries, v, retrieved, prefix);
}

void write_report_pool(const std::filesystem::path& path, const RetrievalPool& pool, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto emb = pool.embedding(i);
    nlohmann::json j;
    j["id"] = pool.entry(i).id;
    j["embedding"] = std::vector<double>(emb.begin(), emb.end());
    j["tokens"] = nlohmann::json::array();
    for (const auto& s : pool.entry(i).sentences) j["tokens"].push_back(vocab.decode(s));
    out << j.dump() << '\n';
  }
}

}  // namespace hiret
