#include "hiret/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hiret/errors.hpp"

namespace hiret {

namespace {

constexpr const char* kSentenceAttention = "dec.att_s.";
constexpr const char* kWordAttention = "dec.att_w.";
constexpr const char* kFusion = "dec.fuse.";
constexpr const char* kReportTemplate = "dec.mqa_r.";
constexpr const char* kSentenceTemplate = "dec.mqa_s.";

bool uses_sentence_templates(Variant v) { return v == Variant::kFull || v == Variant::kNoVlrm; }
bool uses_report_template(Variant v) { return v != Variant::kNoVlrm; }

Tensor stack_rows(const RetrievalPool& pool, const std::vector<Hit>& hits) {
  Tensor out({hits.size(), pool.dim()});
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto e = pool.embedding(hits[i].index);
    std::copy(e.begin(), e.end(), out.data() + i * pool.dim());
  }
  return out;
}

std::vector<double> to_vector(const Var& v) { return {v.value().begin(), v.value().end()}; }

int greedy_token(std::span<const double> logits) {
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int id = static_cast<int>(i);
    if (id == Vocabulary::kPad || id == Vocabulary::kStart || id == Vocabulary::kUnk) continue;
    if (logits[i] > best_value) {
      best_value = logits[i];
      best = id;
    }
  }
  return best;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoVlrm: return "no-vlrm";
    case Variant::kNoLlrm: return "no-llrm";
    case Variant::kNoHld: return "no-hld";
  }
  return "full";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (variant_name(v) == name) return v;
  }
  throw UsageError("unknown variant '" + name + "' (expected full, no-vlrm, no-llrm or no-hld)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = {Variant::kFull, Variant::kNoVlrm, Variant::kNoLlrm, Variant::kNoHld};
  return kAll;
}

void init_decoder(ParameterStore& store, const DecoderConfig& cfg, Rng& rng) {
  const std::size_t h = cfg.hidden;
  const std::size_t d = cfg.d;
  store.add_uniform("dec.h0", {h}, 1.0 / std::sqrt(static_cast<double>(h)), rng).set_requires_grad(false);
  store.add_uniform("dec.word_embed", {cfg.vocab, d}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  store.add_uniform("dec.disease_embed", {cfg.classes, d}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  init_spatial_attention(store, kSentenceAttention, d, h + cfg.classes, cfg.attn, rng);
  init_spatial_attention(store, kWordAttention, d, h, cfg.attn, rng);
  init_view_fusion(store, kFusion, d, cfg.views, rng);
  init_multi_query(store, kReportTemplate, d, cfg.keywords + cfg.diseases, rng);
  init_multi_query(store, kSentenceTemplate, d, cfg.keywords + cfg.diseases, rng);
  for (const char* level : {"s", "w"}) {
    const std::string prefix = std::string("dec.anchor_") + level + ".";
    store.add_weight(prefix + "W", d, h, rng);
    store.add_zeros(prefix + "b", {d});
  }
  store.add_weight("dec.slstm.W", 4 * h, 3 * d + h, rng);
  store.add_zeros("dec.slstm.b", {4 * h});
  store.add_weight("dec.wlstm.W", 4 * h, 4 * d + 2 * h, rng);
  store.add_zeros("dec.wlstm.b", {4 * h});
  store.add_weight("dec.ffn.W1", cfg.ffn, h, rng);
  store.add_zeros("dec.ffn.b1", {cfg.ffn});
  store.add_weight("dec.ffn.W2", cfg.vocab, cfg.ffn, rng);
  store.add_zeros("dec.ffn.b2", {cfg.vocab});
}

FrozenModules::FrozenModules(ParameterStore& vlr, ParameterStore& llr, const VlrDims& dims, const Vocabulary& vocab,
                             const KeywordDictionary& dictionary, const std::vector<CorpusSample>& train)
    : vlr_(&vlr),
      llr_(&llr),
      dims_(dims),
      vocab_(&vocab),
      dictionary_(&dictionary),
      reports_(build_report_pool(train, vlr, vocab, dims)),
      bank_(train, llr, vocab, dims.enc),
      all_sentences_(std::make_shared<const RetrievalPool>(build_global_sentence_pool(bank_))) {}

std::vector<double> FrozenModules::embed_sentence(const std::vector<int>& tokens) const {
  Graph g(*llr_, false);
  return to_vector(encode_text(g, tokens, TextLevel::kSentence, dims_.enc));
}

std::vector<int> FrozenModules::keywords(const std::vector<std::vector<int>>& sentences, std::size_t n) const {
  std::vector<std::vector<Sentence>> reports(1);
  for (const auto& s : sentences) reports[0].push_back(vocab_->decode(s));
  std::vector<int> out;
  for (const auto& word : extract_keywords(reports, *dictionary_, n)) out.push_back(vocab_->id(word));
  return out;
}

SampleContext build_context(const FrozenModules& frozen, const CorpusSample& sample, const DecoderConfig& cfg,
                            Variant variant, bool exclude_self) {
  SampleContext ctx;
  ctx.sample_id = sample.id;
  if (exclude_self) ctx.exclude = sample.id;
  {
    Graph g(frozen.vlr(), false);
    ImageContext image = vlr_image_forward(g, sample.views, frozen.dims());
    for (const Var& m : image.maps) ctx.maps.push_back(m.tensor());
    ctx.c_pred = image.c_pred.tensor();
    ctx.v = image.v.tensor();
  }
  ctx.diseases = top_diseases(ctx.c_pred.values(), cfg.diseases);
  if (variant == Variant::kNoVlrm) {
    ctx.sentence_pool = frozen.all_sentences();
    return ctx;
  }
  ctx.reports = retrieve_reports(ctx.v.values(), frozen.reports(), cfg.reports, ctx.exclude);
  ctx.report_values = stack_rows(frozen.reports(), ctx.reports);
  std::vector<std::vector<int>> sentences;
  for (const Hit& h : ctx.reports) {
    for (const auto& s : frozen.reports().entry(h.index).sentences) sentences.push_back(s);
  }
  ctx.report_keywords = frozen.keywords(sentences, cfg.keywords);
  if (uses_sentence_templates(variant)) {
    ctx.sentence_pool = std::make_shared<const RetrievalPool>(build_sentence_pool(ctx.reports, frozen.reports(),
                                                                                  frozen.bank()));
  }
  return ctx;
}

SentenceRetrieval retrieve_for_sentence(const FrozenModules& frozen, const SampleContext& ctx,
                                        const std::vector<int>& sentence, const DecoderConfig& cfg) {
  if (!ctx.sentence_pool) throw ValidationError("this variant has no sentence pool");
  SentenceRetrieval out;
  const auto query = frozen.embed_sentence(sentence);
  out.hits = retrieve_sentences(query, *ctx.sentence_pool, cfg.sentences, ctx.exclude);
  out.values = stack_rows(*ctx.sentence_pool, out.hits);
  std::vector<std::vector<int>> texts;
  for (const Hit& h : out.hits) texts.push_back(ctx.sentence_pool->entry(h.index).sentences.at(0));
  out.keywords = frozen.keywords(texts, cfg.keywords);
  return out;
}

DecoderInputs decoder_inputs(Graph& g, const SampleContext& ctx, const DecoderConfig& cfg, Variant variant) {
  if (ctx.maps.size() != cfg.views) {
    throw ValidationError("expected " + std::to_string(cfg.views) + " views, got " + std::to_string(ctx.maps.size()));
  }
  DecoderInputs in;
  for (const Tensor& m : ctx.maps) {
    in.maps.push_back(g.constant(m));
    in.cells_s.push_back(project_cells(g, in.maps.back(), kSentenceAttention));
    in.cells_w.push_back(project_cells(g, in.maps.back(), kWordAttention));
  }
  in.c_pred = g.constant(ctx.c_pred);
  in.zero_d = g.constant(Tensor({cfg.d}));
  in.zero_h = g.constant(Tensor({cfg.hidden}));
  if (uses_report_template(variant)) {
    Var queries = query_set(g, g.param("dec.word_embed"), ctx.report_keywords, cfg.keywords,
                            g.param("dec.disease_embed"), ctx.diseases);
    auto r = report_template(g, g.constant(ctx.v), g.constant(ctx.report_values), queries, kReportTemplate);
    in.r_s = r.output;
    in.report_weights = r.weights;
  } else {
    in.r_s = in.zero_d;
  }
  return in;
}

TemplateInputs template_inputs(Graph& g, const SentenceRetrieval& retrieval, const SampleContext& ctx,
                               const DecoderConfig& cfg) {
  TemplateInputs out;
  out.values = prepare_multi_query(g, g.constant(retrieval.values), kSentenceTemplate);
  out.queries = query_set(g, g.param("dec.word_embed"), retrieval.keywords, cfg.keywords,
                          g.param("dec.disease_embed"), ctx.diseases);
  return out;
}

MultiQueryResult sentence_template_vector(Graph& g, const TemplateInputs& inputs, Var hidden, const char* level) {
  const std::string prefix = std::string("dec.anchor_") + level + ".";
  Var anchor = linear(hidden, g.param(prefix + "W"), g.param(prefix + "b"));
  return multi_query_attention(g, inputs.queries, anchor, inputs.values, kSentenceTemplate);
}

namespace {

// Attends every view under `condition` and fuses the results.
Var attend_views(Graph& g, const DecoderInputs& in, const std::vector<Var>& cells, Var condition, const char* prefix,
                 std::vector<Var>& alphas) {
  std::vector<Var> attended;
  for (std::size_t v = 0; v < in.maps.size(); ++v) {
    Var alpha = spatial_weights(spatial_scores_projected(g, cells[v], condition, prefix));
    alphas.push_back(alpha);
    attended.push_back(attend_spatial(in.maps[v], alpha));
  }
  return fuse_views(g, attended, kFusion, in.maps.size());
}

}  // namespace

SentenceStep sentence_step(Graph& g, const DecoderInputs& in, const LstmState& prev, Var u_prev) {
  SentenceStep out;
  Var vs = attend_views(g, in, in.cells_s, concat({prev.h, in.c_pred}), kSentenceAttention, out.alphas);
  out.state = lstm_cell(concat({vs, u_prev, in.r_s}), prev, g.param("dec.slstm.W"), g.param("dec.slstm.b"));
  return out;
}

WordStep word_step(Graph& g, const DecoderInputs& in, Var hs, const LstmState& prev, int prev_token, Var u_word) {
  WordStep out;
  Var vw = attend_views(g, in, in.cells_w, prev.h, kWordAttention, out.alphas);
  Var word = embedding(g.param("dec.word_embed"), prev_token);
  out.state = lstm_cell(concat({word, hs, u_word, vw, in.r_s}), prev, g.param("dec.wlstm.W"), g.param("dec.wlstm.b"));
  Var hidden = tanh(linear(out.state.h, g.param("dec.ffn.W1"), g.param("dec.ffn.b1")));
  out.logits = linear(hidden, g.param("dec.ffn.W2"), g.param("dec.ffn.b2"));
  return out;
}

LstmState initial_sentence_state(Graph& g, const DecoderInputs& in) { return {g.param("dec.h0"), in.zero_h}; }

LstmState zero_state(const DecoderInputs& in) { return {in.zero_h, in.zero_h}; }

TeacherSample make_teacher_sample(const FrozenModules& frozen, const CorpusSample& sample, const DecoderConfig& cfg,
                                  Variant variant, const GenerationLimits& limits) {
  TeacherSample out;
  out.ctx = build_context(frozen, sample, cfg, variant, true);
  for (const auto& s : sample.sentences) {
    if (out.sentences.size() == limits.max_sentences) break;
    auto ids = frozen.vocab().encode(s);
    if (ids.empty()) continue;
    if (ids.size() > limits.max_words) ids.resize(limits.max_words);
    out.sentences.push_back(std::move(ids));
  }
  if (out.sentences.empty()) throw ValidationError("sample " + std::to_string(sample.id) + " has no sentences");
  if (uses_sentence_templates(variant)) {
    for (const auto& s : out.sentences) out.after.push_back(retrieve_for_sentence(frozen, out.ctx, s, cfg));
  }
  return out;
}

namespace {

Var flat_loss(Graph& g, const TeacherSample& sample, const DecoderConfig& cfg, const GenerationLimits& limits) {
  DecoderInputs in = decoder_inputs(g, sample.ctx, cfg, Variant::kNoHld);
  std::vector<int> targets;
  for (const auto& s : sample.sentences) targets.insert(targets.end(), s.begin(), s.end());
  targets.resize(std::min(targets.size(), limits.max_sentences * limits.max_words));
  targets.push_back(Vocabulary::kEnd);
  std::vector<Var> logits;
  LstmState w = zero_state(in);
  int prev = Vocabulary::kStart;
  for (int target : targets) {
    WordStep ws = word_step(g, in, in.zero_h, w, prev, in.zero_d);
    w = ws.state;
    logits.push_back(ws.logits);
    prev = target;
  }
  return cross_entropy(reshape(concat(logits, 0), {logits.size(), cfg.vocab}), targets);
}

}  // namespace

Var teacher_forced_loss(Graph& g, const TeacherSample& sample, const DecoderConfig& cfg, Variant variant,
                        const GenerationLimits& limits, DecoderProbe* probe) {
  if (variant == Variant::kNoHld) return flat_loss(g, sample, cfg, limits);
  const bool templates = uses_sentence_templates(variant);
  if (templates && sample.after.size() != sample.sentences.size()) {
    throw ValidationError("teacher sample was prepared for a variant without sentence retrieval");
  }
  DecoderInputs in = decoder_inputs(g, sample.ctx, cfg, variant);
  std::vector<Var> logits;
  std::vector<int> targets;
  LstmState s = initial_sentence_state(g, in);
  Var u_prev = in.zero_d;
  std::optional<TemplateInputs> tmpl;
  const std::size_t total = sample.sentences.size();
  const std::size_t steps = std::min(total + 1, limits.max_sentences);
  const std::vector<int> sentinel;
  LstmState w = zero_state(in);
  for (std::size_t t = 0; t < steps; ++t) {
    s = sentence_step(g, in, s, u_prev).state;
    const auto& words = t < total ? sample.sentences[t] : sentinel;
    if (!cfg.carry_word_state) w = zero_state(in);
    int prev = Vocabulary::kStart;
    for (std::size_t i = 0; i <= words.size(); ++i) {
      Var u_word = in.zero_d;
      if (tmpl) {
        if (t == 0 && probe) ++probe->first_sentence_template_reads;
        u_word = sentence_template_vector(g, *tmpl, w.h, "w").output;
      }
      WordStep ws = word_step(g, in, s.h, w, prev, u_word);
      w = ws.state;
      logits.push_back(ws.logits);
      const int target = i < words.size() ? words[i] : Vocabulary::kEnd;
      targets.push_back(target);
      prev = target;
    }
    if (templates && t < total && t + 1 < steps) {
      if (t == 0 && probe) ++probe->first_sentence_retrievals;
      tmpl = template_inputs(g, sample.after[t], sample.ctx, cfg);
      u_prev = sentence_template_vector(g, *tmpl, s.h, "s").output;
    }
  }
  return cross_entropy(reshape(concat(logits, 0), {logits.size(), cfg.vocab}), targets);
}

namespace {

void record_report_trace(GeneratedReport& out, const SampleContext& ctx, const DecoderInputs& in) {
  for (const Hit& h : ctx.reports) out.retrieved_reports.push_back(h.id);
  if (!in.report_weights.valid()) return;
  const auto& shape = in.report_weights.shape();
  const auto w = in.report_weights.value();
  for (std::size_t q = 0; q < shape[0]; ++q) {
    out.report_attention.emplace_back(w.begin() + static_cast<std::ptrdiff_t>(q * shape[1]),
                                      w.begin() + static_cast<std::ptrdiff_t>((q + 1) * shape[1]));
  }
}

GeneratedReport generate_flat(ParameterStore& decoder, const SampleContext& ctx, const DecoderConfig& cfg,
                              const GenerationLimits& limits) {
  GeneratedReport out;
  out.sample_id = ctx.sample_id;
  Graph g(decoder, false);
  DecoderInputs in = decoder_inputs(g, ctx, cfg, Variant::kNoHld);
  record_report_trace(out, ctx, in);
  std::vector<int> words;
  LstmState w = zero_state(in);
  int prev = Vocabulary::kStart;
  for (std::size_t i = 0; i < limits.max_sentences * limits.max_words; ++i) {
    WordStep ws = word_step(g, in, in.zero_h, w, prev, in.zero_d);
    w = ws.state;
    const int token = greedy_token(ws.logits.value());
    ++out.tokens_emitted;
    if (token == Vocabulary::kEnd) break;
    words.push_back(token);
    prev = token;
  }
  if (!words.empty()) out.sentences.push_back(std::move(words));
  return out;
}

}  // namespace

GeneratedReport generate_report(ParameterStore& decoder, const FrozenModules& frozen, const CorpusSample& sample,
                                const DecoderConfig& cfg, Variant variant, const GenerationLimits& limits,
                                DecoderProbe* probe) {
  if (limits.max_sentences == 0 || limits.max_words == 0) throw ConfigError("generation limits must be positive");
  const SampleContext ctx = build_context(frozen, sample, cfg, variant, false);
  if (variant == Variant::kNoHld) return generate_flat(decoder, ctx, cfg, limits);

  const bool templates = uses_sentence_templates(variant);
  GeneratedReport out;
  out.sample_id = sample.id;
  Graph g(decoder, false);
  DecoderInputs in = decoder_inputs(g, ctx, cfg, variant);
  record_report_trace(out, ctx, in);
  LstmState s = initial_sentence_state(g, in);
  Var u_prev = in.zero_d;
  std::optional<TemplateInputs> tmpl;
  LstmState w = zero_state(in);
  for (std::size_t t = 0; t < limits.max_sentences; ++t) {
    SentenceStep step = sentence_step(g, in, s, u_prev);
    s = step.state;
    if (!cfg.carry_word_state) w = zero_state(in);
    int prev = Vocabulary::kStart;
    std::vector<int> words;
    for (std::size_t i = 0; i < limits.max_words; ++i) {
      Var u_word = in.zero_d;
      if (tmpl) {
        if (t == 0 && probe) ++probe->first_sentence_template_reads;
        u_word = sentence_template_vector(g, *tmpl, w.h, "w").output;
      }
      WordStep ws = word_step(g, in, s.h, w, prev, u_word);
      w = ws.state;
      const int token = greedy_token(ws.logits.value());
      ++out.tokens_emitted;
      if (token == Vocabulary::kEnd) break;
      words.push_back(token);
      prev = token;
    }
    if (words.empty()) break;  // the empty sentence ends the report
    std::vector<std::vector<double>> alphas;
    for (const Var& a : step.alphas) alphas.push_back(to_vector(a));
    out.sentence_attention.push_back(std::move(alphas));
    out.sentences.push_back(words);
    if (templates && t + 1 < limits.max_sentences) {
      if (t == 0 && probe) ++probe->first_sentence_retrievals;
      SentenceRetrieval retrieval = retrieve_for_sentence(frozen, ctx, words, cfg);
      std::vector<std::int64_t> ids;
      for (const Hit& h : retrieval.hits) ids.push_back(h.id);
      out.retrieved_sentences.push_back(std::move(ids));
      tmpl = template_inputs(g, retrieval, ctx, cfg);
      u_prev = sentence_template_vector(g, *tmpl, s.h, "s").output;
    }
  }
  return out;
}

double decoder_train_step(ParameterStore& store, Adam& adam, const std::vector<const TeacherSample*>& batch,
                          const DecoderConfig& cfg, Variant variant, const GenerationLimits& limits) {
  if (batch.empty()) throw ValidationError("empty decoder batch");
  store.zero_grad();
  Graph g(store);
  std::vector<Var> losses;
  for (const TeacherSample* s : batch) losses.push_back(teacher_forced_loss(g, *s, cfg, variant, limits));
  Var loss = scale(sum(concat(losses, 0)), 1.0 / static_cast<double>(batch.size()));
  g.backward(loss);
  adam.clip_and_step(store);
  return loss.item();
}

std::vector<double> train_decoder(ParameterStore& store, Adam& adam, const std::vector<TeacherSample>& train,
                                  const DecoderConfig& cfg, Variant variant, const GenerationLimits& limits,
                                  const DecoderEpochOptions& options) {
  if (train.empty()) throw ValidationError("decoder training set is empty");
  const double base = adam.options().lr;
  std::vector<const TeacherSample*> order;
  for (const auto& s : train) order.push_back(&s);
  std::vector<double> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    adam.set_lr_factor(lr_schedule(epoch, base, options.schedule) / base);
    Rng rng(Rng::derive(options.seed, "decoder-epoch:" + std::to_string(epoch)));
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      const std::size_t len = std::min(options.batch, order.size() - start);
      std::vector<const TeacherSample*> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                              order.begin() + static_cast<std::ptrdiff_t>(start + len));
      total += decoder_train_step(store, adam, batch, cfg, variant, limits);
      ++batches;
    }
    history.push_back(total / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, history.back());
  }
  adam.set_lr_factor(1.0);
  return history;
}

}  // namespace hiret
