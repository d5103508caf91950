#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hiret/checkpoint.hpp"
#include "hiret/config.hpp"
#include "hiret/corpus.hpp"
#include "hiret/decoder.hpp"
#include "hiret/metrics.hpp"
#include "hiret/vlr.hpp"

namespace hiret {

struct Dataset {
  SyntheticWorld world;
  CorpusSplit split;
  Vocabulary vocab;
  KeywordDictionary dictionary;
};

// World, corpus, split, vocabulary and dictionary from config.seed.
Dataset synthesize(const Config& config);
// Files: world.json, train/val/test.jsonl, vocab.json, dictionary.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir, const Config& config);

struct PipelinePaths {
  std::filesystem::path data = "data";
  std::filesystem::path checkpoints = "checkpoints";
  std::filesystem::path out = "out";
};

struct MetricRow {
  std::string name;
  MetricReport metrics;
};

std::string format_table(const std::vector<MetricRow>& rows);
std::string table_json(const std::vector<MetricRow>& rows);

struct VlrStageResult {
  Checkpoint checkpoint;
  VlrEval val;
  std::vector<double> losses;
};
struct LlrStageResult {
  Checkpoint checkpoint;
  double val_accuracy = 0.0;
  std::vector<double> losses;
};
struct DecoderStageResult {
  Checkpoint checkpoint;
  std::vector<double> losses;
};

// The stages as pure functions of config and data; seeds are derived from
// config.seed and a per-stage label.
VlrStageResult run_vlr_stage(const Config& config, const Dataset& data);
LlrStageResult run_llr_stage(const Config& config, const Dataset& data);
DecoderStageResult run_decoder_stage(const Config& config, const Dataset& data, const FrozenModules& frozen,
                                     Variant variant);

FrozenModules make_frozen(const Config& config, const Dataset& data, ParameterStore& vlr, ParameterStore& llr);

std::vector<GeneratedReport> generate_all(const Config& config, const Dataset& data, const FrozenModules& frozen,
                                          ParameterStore& decoder, Variant variant,
                                          const std::vector<CorpusSample>& samples);

MetricReport score_reports(const Dataset& data, const std::vector<std::vector<std::vector<int>>>& reports,
                           const std::vector<CorpusSample>& samples);
MetricReport score_generated(const Dataset& data, const std::vector<GeneratedReport>& generated,
                             const std::vector<CorpusSample>& samples);
// The V-L Retrieval baseline: the top-1 retrieved training report verbatim.
MetricReport score_retrieval_baseline(const Config& config, const Dataset& data, const FrozenModules& frozen,
                                      const std::vector<CorpusSample>& samples);

// The CLI's stages over files. Every stage reads its inputs from disk and
// fails with MissingArtifactError naming the command that produces them.
class Pipeline {
 public:
  Pipeline(Config config, PipelinePaths paths);

  void synth_data();
  VlrEval pretrain_vlr();
  double pretrain_llr();
  void train(Variant variant);
  std::vector<GeneratedReport> generate(Variant variant);
  std::vector<MetricRow> evaluate(Variant variant);
  std::vector<MetricRow> ablate();

  const Config& config() const { return config_; }
  std::filesystem::path checkpoint_path(Stage stage, Variant variant = Variant::kFull) const;

 private:
  const Dataset& data();
  Checkpoint load(Stage stage, Variant variant = Variant::kFull) const;
  std::vector<MetricRow> evaluate_loaded(Variant variant, const FrozenModules& frozen, ParameterStore& decoder);

  Config config_;
  PipelinePaths paths_;
  std::optional<Dataset> data_;
};

}  // namespace hiret
