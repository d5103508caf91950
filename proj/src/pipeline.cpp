#include "hiret/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "hiret/errors.hpp"
#include "hiret/llr.hpp"
#include "hiret/rng.hpp"
#include "json.hpp"

namespace hiret {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<Sentence> decode_all(const Vocabulary& vocab, const std::vector<std::vector<int>>& sentences) {
  std::vector<Sentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(vocab.decode(s));
  return out;
}

std::string join(const Sentence& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void log_epoch(const char* stage, int epoch, double loss) { spdlog::info("{} epoch {} loss {:.4f}", stage, epoch, loss); }

std::vector<std::vector<int>> top1_report(const FrozenModules& frozen, const CorpusSample& sample,
                                          const DecoderConfig& cfg) {
  const SampleContext ctx = build_context(frozen, sample, cfg, Variant::kFull, false);
  return frozen.reports().entry(ctx.reports.front().index).sentences;
}

}  // namespace

Dataset synthesize(const Config& config) {
  Dataset d{.world = SyntheticWorld::make(config.seed, config.world), .split = {}, .vocab = {}, .dictionary = {}};
  d.split = split_corpus(generate_corpus(config.seed, config.samples, d.world), config.seed, config.split);
  d.vocab = Vocabulary::build(d.split.train, config.min_count);
  d.dictionary = build_keyword_dictionary(d.split.train, d.world, d.vocab, config.dictionary);
  return d;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  write_text(dir / "world.json", data.world.to_json());
  write_corpus(dir / "train.jsonl", data.split.train);
  write_corpus(dir / "val.jsonl", data.split.val);
  write_corpus(dir / "test.jsonl", data.split.test);
  write_string_array(dir / "vocab.json", data.vocab.tokens());
  write_string_array(dir / "dictionary.json", data.dictionary.words);
}

Dataset read_dataset(const fs::path& dir, const Config& config) {
  const fs::path world_file = dir / "world.json";
  if (!fs::exists(world_file)) {
    throw MissingArtifactError("no corpus in " + dir.string() + "; run `hiret synth-data` first");
  }
  Dataset d{.world = SyntheticWorld::make(config.seed, config.world), .split = {}, .vocab = {}, .dictionary = {}};
  // The world is not stored in a reloadable form; it is rebuilt from the seed
  // and must agree with the one the corpus was drawn from.
  if (read_text(world_file) != d.world.to_json()) {
    throw ConfigError("corpus in " + dir.string() +
                      " was synthesized with a different seed or world settings; rerun `hiret synth-data`");
  }
  d.split.train = read_corpus(dir / "train.jsonl", config.world.grid);
  d.split.val = read_corpus(dir / "val.jsonl", config.world.grid);
  d.split.test = read_corpus(dir / "test.jsonl", config.world.grid);
  d.vocab = Vocabulary(read_string_array(dir / "vocab.json"));
  d.dictionary.words = read_string_array(dir / "dictionary.json");
  if (d.split.train.empty() || d.split.test.empty()) throw ValidationError("empty train or test split in " + dir.string());
  return d;
}

std::string format_table(const std::vector<MetricRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = pad("model", width);
  for (const char* h : {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "CIDEr", "AUC"}) out += "  " + pad(h, 7);
  out += '\n';
  for (const auto& r : rows) {
    out += pad(r.name, width);
    const auto& m = r.metrics;
    for (double v : {m.bleu[0], m.bleu[1], m.bleu[2], m.bleu[3], m.rouge_l, m.cider, m.auc}) out += "  " + pad(fixed(v), 7);
    out += '\n';
  }
  return out;
}

std::string table_json(const std::vector<MetricRow>& rows) {
  json j = json::array();
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    j.push_back({{"model", r.name},
                 {"bleu1", m.bleu[0]},
                 {"bleu2", m.bleu[1]},
                 {"bleu3", m.bleu[2]},
                 {"bleu4", m.bleu[3]},
                 {"rouge_l", m.rouge_l},
                 {"cider", m.cider},
                 {"auc", m.auc}});
  }
  return j.dump(2) + '\n';
}

VlrStageResult run_vlr_stage(const Config& config, const Dataset& data) {
  const VlrDims dims = config.vlr_dims(data.vocab.size());
  VlrStageResult result;
  result.checkpoint.stage = Stage::kVlr;
  result.checkpoint.fingerprint = config_fingerprint(config, Stage::kVlr);
  ParameterStore& store = result.checkpoint.params;
  Rng rng(Rng::derive(config.seed, "vlr-init"));
  init_vlr(store, dims, rng);
  Adam adam(config.vlr.adam());
  EpochOptions o;
  o.epochs = config.vlr.epochs;
  o.batch = config.vlr.batch;
  o.seed = Rng::derive(config.seed, "vlr-train");
  o.schedule = config.vlr.schedule;
  o.on_epoch = [](int e, double loss) { log_epoch("vlr", e, loss); };
  result.losses = train_vlr(store, adam, data.split.train, data.vocab, dims, o);
  result.checkpoint.adam = snapshot(adam);
  const auto& held_out = data.split.val.size() >= 2 ? data.split.val : data.split.test;
  result.val = evaluate_vlr(store, held_out, data.vocab, dims, Rng::derive(config.seed, "vlr-eval"));
  return result;
}

LlrStageResult run_llr_stage(const Config& config, const Dataset& data) {
  const VlrDims dims = config.vlr_dims(data.vocab.size());
  LlrStageResult result;
  result.checkpoint.stage = Stage::kLlr;
  result.checkpoint.fingerprint = config_fingerprint(config, Stage::kLlr);
  ParameterStore& store = result.checkpoint.params;
  Rng rng(Rng::derive(config.seed, "llr-init"));
  init_llr(store, dims.enc, rng);
  Adam adam(config.llr.adam());
  LlrEpochOptions o;
  o.epochs = config.llr.epochs;
  o.batch = config.llr.batch;
  o.seed = Rng::derive(config.seed, "llr-train");
  o.schedule = config.llr.schedule;
  o.pairs_per_epoch = config.llr_pairs;
  o.on_epoch = [](int e, double loss) { log_epoch("llr", e, loss); };
  result.losses = train_llr(store, adam, data.split.train, data.vocab, dims.enc, o);
  result.checkpoint.adam = snapshot(adam);
  const auto& held_out = data.split.val.size() >= 2 ? data.split.val : data.split.test;
  result.val_accuracy =
      evaluate_llr(store, held_out, data.vocab, dims.enc, Rng::derive(config.seed, "llr-eval"), 2000);
  return result;
}

FrozenModules make_frozen(const Config& config, const Dataset& data, ParameterStore& vlr, ParameterStore& llr) {
  return FrozenModules(vlr, llr, config.vlr_dims(data.vocab.size()), data.vocab, data.dictionary, data.split.train);
}

DecoderStageResult run_decoder_stage(const Config& config, const Dataset& data, const FrozenModules& frozen,
                                     Variant variant) {
  const DecoderConfig cfg = config.decoder_config(data.vocab.size());
  std::vector<TeacherSample> teacher;
  teacher.reserve(data.split.train.size());
  for (const auto& s : data.split.train) teacher.push_back(make_teacher_sample(frozen, s, cfg, variant, config.limits));

  DecoderStageResult result;
  result.checkpoint.stage = Stage::kDecoder;
  result.checkpoint.fingerprint = config_fingerprint(config, Stage::kDecoder);
  ParameterStore& store = result.checkpoint.params;
  // Every variant starts from the same draw so that ablations differ only in
  // structure.
  Rng rng(Rng::derive(config.seed, "decoder-init"));
  init_decoder(store, cfg, rng);
  Adam adam(config.dec.adam());
  DecoderEpochOptions o;
  o.epochs = config.dec.epochs;
  o.batch = config.dec.batch;
  o.seed = Rng::derive(config.seed, "decoder-train");
  o.schedule = config.dec.schedule;
  const std::string label = "decoder " + variant_name(variant);
  o.on_epoch = [&label](int e, double loss) { log_epoch(label.c_str(), e, loss); };
  result.losses = train_decoder(store, adam, teacher, cfg, variant, config.limits, o);
  result.checkpoint.adam = snapshot(adam);
  return result;
}

std::vector<GeneratedReport> generate_all(const Config& config, const Dataset& data, const FrozenModules& frozen,
                                          ParameterStore& decoder, Variant variant,
                                          const std::vector<CorpusSample>& samples) {
  const DecoderConfig cfg = config.decoder_config(data.vocab.size());
  std::vector<GeneratedReport> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(generate_report(decoder, frozen, s, cfg, variant, config.limits));
  return out;
}

MetricReport score_reports(const Dataset& data, const std::vector<std::vector<std::vector<int>>>& reports,
                           const std::vector<CorpusSample>& samples) {
  if (reports.size() != samples.size()) throw DimensionError("score_reports: one report per sample expected");
  std::vector<Tokens> candidates;
  std::vector<Tokens> references;
  std::vector<std::vector<int>> labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    candidates.push_back(flatten(decode_all(data.vocab, reports[i])));
    references.push_back(flatten(samples[i].sentences));
    labels.push_back(samples[i].labels);
  }
  return evaluate_reports(candidates, references, labels, data.world);
}

MetricReport score_generated(const Dataset& data, const std::vector<GeneratedReport>& generated,
                             const std::vector<CorpusSample>& samples) {
  std::vector<std::vector<std::vector<int>>> reports;
  reports.reserve(generated.size());
  for (const auto& g : generated) reports.push_back(g.sentences);
  return score_reports(data, reports, samples);
}

MetricReport score_retrieval_baseline(const Config& config, const Dataset& data, const FrozenModules& frozen,
                                      const std::vector<CorpusSample>& samples) {
  const DecoderConfig cfg = config.decoder_config(data.vocab.size());
  std::vector<std::vector<std::vector<int>>> reports;
  reports.reserve(samples.size());
  for (const auto& s : samples) reports.push_back(top1_report(frozen, s, cfg));
  return score_reports(data, reports, samples);
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(Config config, PipelinePaths paths) : config_(std::move(config)), paths_(std::move(paths)) {
  validate(config_);
}

const Dataset& Pipeline::data() {
  if (!data_) data_ = read_dataset(paths_.data, config_);
  return *data_;
}

fs::path Pipeline::checkpoint_path(Stage stage, Variant variant) const {
  switch (stage) {
    case Stage::kVlr: return paths_.checkpoints / "vlr.ckpt";
    case Stage::kLlr: return paths_.checkpoints / "llr.ckpt";
    case Stage::kDecoder: break;
  }
  return paths_.checkpoints / ("decoder-" + variant_name(variant) + ".ckpt");
}

Checkpoint Pipeline::load(Stage stage, Variant variant) const {
  std::string hint;
  switch (stage) {
    case Stage::kVlr: hint = "run `hiret pretrain-vlr` first"; break;
    case Stage::kLlr: hint = "run `hiret pretrain-llr` first"; break;
    case Stage::kDecoder: hint = "run `hiret train --variant " + variant_name(variant) + "` first"; break;
  }
  return load_checkpoint(checkpoint_path(stage, variant), stage, config_fingerprint(config_, stage), hint);
}

void Pipeline::synth_data() {
  data_ = synthesize(config_);
  write_dataset(paths_.data, *data_);
  spdlog::info("wrote {} train / {} val / {} test samples, vocabulary {} to {}", data_->split.train.size(),
               data_->split.val.size(), data_->split.test.size(), data_->vocab.size(), paths_.data.string());
}

VlrEval Pipeline::pretrain_vlr() {
  const Dataset& d = data();
  VlrStageResult r = run_vlr_stage(config_, d);
  save_checkpoint(checkpoint_path(Stage::kVlr), r.checkpoint);
  const RetrievalPool pool = build_report_pool(d.split.train, r.checkpoint.params, d.vocab,
                                               config_.vlr_dims(d.vocab.size()));
  fs::create_directories(paths_.out);
  write_report_pool(paths_.out / "report_pool.jsonl", pool, d.vocab);
  write_text(paths_.out / "vlr.json", json({{"match_accuracy", r.val.match_accuracy},
                                            {"disease_auc", r.val.disease_auc},
                                            {"losses", r.losses}})
                                          .dump(2) +
                                          '\n');
  spdlog::info("vlr held-out matching {:.4f}, disease AUC {:.4f}", r.val.match_accuracy, r.val.disease_auc);
  return r.val;
}

double Pipeline::pretrain_llr() {
  const Dataset& d = data();
  LlrStageResult r = run_llr_stage(config_, d);
  save_checkpoint(checkpoint_path(Stage::kLlr), r.checkpoint);
  fs::create_directories(paths_.out);
  write_text(paths_.out / "llr.json",
             json({{"pair_accuracy", r.val_accuracy}, {"losses", r.losses}}).dump(2) + '\n');
  spdlog::info("llr held-out pair accuracy {:.4f}", r.val_accuracy);
  return r.val_accuracy;
}

void Pipeline::train(Variant variant) {
  const Dataset& d = data();
  Checkpoint vlr = load(Stage::kVlr);
  Checkpoint llr = load(Stage::kLlr);
  const FrozenModules frozen = make_frozen(config_, d, vlr.params, llr.params);
  DecoderStageResult r = run_decoder_stage(config_, d, frozen, variant);
  save_checkpoint(checkpoint_path(Stage::kDecoder, variant), r.checkpoint);
}

std::vector<GeneratedReport> Pipeline::generate(Variant variant) {
  const Dataset& d = data();
  Checkpoint vlr = load(Stage::kVlr);
  Checkpoint llr = load(Stage::kLlr);
  Checkpoint dec = load(Stage::kDecoder, variant);
  const FrozenModules frozen = make_frozen(config_, d, vlr.params, llr.params);
  const DecoderConfig cfg = config_.decoder_config(d.vocab.size());
  const auto& test = d.split.test;
  std::vector<GeneratedReport> reports = generate_all(config_, d, frozen, dec.params, variant, test);

  const std::string tag = variant_name(variant);
  fs::create_directories(paths_.out);
  std::ofstream gen(paths_.out / ("generations-" + tag + ".jsonl"));
  std::ofstream trace(paths_.out / ("retrieval-" + tag + ".jsonl"));
  if (!gen || !trace) throw Error("cannot write to " + paths_.out.string());
  json attention = json::array();
  constexpr std::size_t kAttentionDumps = 20;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const GeneratedReport& g = reports[i];
    json sentences = json::array();
    for (const auto& s : decode_all(d.vocab, g.sentences)) sentences.push_back(join(s));
    json reference = json::array();
    for (const auto& s : test[i].sentences) reference.push_back(join(s));
    gen << json({{"id", g.sample_id}, {"sentences", sentences}, {"reference", reference}, {"labels", test[i].labels}})
               .dump()
        << '\n';

    // Retrieval trace: the reports behind r_s (no-vlrm still records what
    // VLR would have retrieved) and the sentences fetched after each step.
    const SampleContext ctx = build_context(frozen, test[i], cfg, Variant::kFull, false);
    json hits = json::array();
    for (const auto& h : ctx.reports) hits.push_back({{"id", h.id}, {"score", h.score}});
    json keywords = json::array();
    for (int k : ctx.report_keywords) keywords.push_back(d.vocab.token(k));
    trace << json({{"id", g.sample_id},
                   {"reports", hits},
                   {"keywords", keywords},
                   {"diseases", ctx.diseases},
                   {"sentences", g.retrieved_sentences}})
                 .dump()
          << '\n';

    if (i < kAttentionDumps) {
      attention.push_back(
          {{"id", g.sample_id}, {"sentence_attention", g.sentence_attention}, {"report_attention", g.report_attention}});
    }
  }
  write_text(paths_.out / ("attention-" + tag + ".json"), attention.dump() + '\n');
  spdlog::info("wrote {} generations for {}", reports.size(), tag);
  return reports;
}

std::vector<MetricRow> Pipeline::evaluate_loaded(Variant variant, const FrozenModules& frozen,
                                                 ParameterStore& decoder) {
  const Dataset& d = data();
  const auto& test = d.split.test;
  const auto generated = generate_all(config_, d, frozen, decoder, variant, test);
  return {{"V-L Retrieval", score_retrieval_baseline(config_, d, frozen, test)},
          {variant_name(variant), score_generated(d, generated, test)}};
}

std::vector<MetricRow> Pipeline::evaluate(Variant variant) {
  const Dataset& d = data();
  Checkpoint vlr = load(Stage::kVlr);
  Checkpoint llr = load(Stage::kLlr);
  Checkpoint dec = load(Stage::kDecoder, variant);
  const FrozenModules frozen = make_frozen(config_, d, vlr.params, llr.params);
  const auto rows = evaluate_loaded(variant, frozen, dec.params);
  const std::string tag = variant_name(variant);
  write_text(paths_.out / ("metrics-" + tag + ".txt"), format_table(rows));
  write_text(paths_.out / ("metrics-" + tag + ".json"), table_json(rows));
  return rows;
}

std::vector<MetricRow> Pipeline::ablate() {
  const Dataset& d = data();
  Checkpoint vlr = load(Stage::kVlr);
  Checkpoint llr = load(Stage::kLlr);
  const FrozenModules frozen = make_frozen(config_, d, vlr.params, llr.params);
  std::vector<MetricRow> rows;
  for (Variant v : all_variants()) {
    DecoderStageResult r = run_decoder_stage(config_, d, frozen, v);
    save_checkpoint(checkpoint_path(Stage::kDecoder, v), r.checkpoint);
    auto pair = evaluate_loaded(v, frozen, r.checkpoint.params);
    if (rows.empty()) rows.push_back(pair[0]);
    rows.push_back(pair[1]);
  }
  write_text(paths_.out / "ablation.txt", format_table(rows));
  write_text(paths_.out / "ablation.json", table_json(rows));
  return rows;
}

}  // namespace hiret
