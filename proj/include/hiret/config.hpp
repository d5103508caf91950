#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hiret/checkpoint.hpp"
#include "hiret/corpus.hpp"
#include "hiret/decoder.hpp"
#include "hiret/encoders.hpp"
#include "hiret/optim.hpp"

namespace hiret {

struct TrainingConfig {
  double lr = 3e-3;
  double image_lr = 0.0;  // VLR only: base lr of "enc.img." when > 0
  double weight_decay = 1e-5;
  double clip = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch = 16;
  int epochs = 30;
  LrSchedule schedule;

  AdamOptions adam() const;
};

struct Config {
  std::string preset = "desk";
  std::uint64_t seed = 123;

  std::size_t samples = 2000;
  WorldOptions world;
  SplitRatios split;
  int min_count = 3;
  std::size_t dictionary = 20;

  EncoderDims enc;  // enc.vocab is filled from the vocabulary at run time
  std::size_t attn = 64;
  DecoderConfig decoder;  // decoder.vocab likewise
  GenerationLimits limits;

  TrainingConfig vlr;
  TrainingConfig llr;
  std::size_t llr_pairs = 2000;
  TrainingConfig dec;

  VlrDims vlr_dims(std::size_t vocab) const;
  DecoderConfig decoder_config(std::size_t vocab) const;
};

// "desk": sizes and schedules that train on one CPU core in minutes.
// "large": full-size settings (H = 512, lr 1e-5 / 1e-5 / 3e-4, 100 epochs).
Config preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

// INI file with sections [run] [data] [model] [vlr] [llr] [decoder]. Keys not
// given keep the preset's value ("preset" under [run] picks the preset).
// Unknown keys and invalid values throw ConfigError.
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& config);
void validate(const Config& config);

// Sets one "section.name" key from its text form. Unknown keys and unparsable
// values throw ConfigError; the result is not validated.
void set_config_value(Config& config, const std::string& key, const std::string& value);

// Every key as "section.name = value", in file order (the --help listing).
std::vector<std::pair<std::string, std::string>> config_entries(const Config& config);

// Hex digest over the settings a stage's checkpoint depends on: the data and
// encoder settings for vlr/llr plus the stage's own training block; the
// decoder stage covers everything.
std::string config_fingerprint(const Config& config, Stage stage);

}  // namespace hiret
