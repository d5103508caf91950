#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "hiret/optim.hpp"
#include "hiret/params.hpp"

namespace hiret {

enum class Stage { kVlr, kLlr, kDecoder };

std::string stage_name(Stage stage);

struct AdamSnapshot {
  std::size_t steps = 0;
  std::map<std::string, Moments> moments;
};

struct Checkpoint {
  Stage stage = Stage::kVlr;
  std::string fingerprint;
  ParameterStore params;
  std::optional<AdamSnapshot> adam;
};

AdamSnapshot snapshot(const Adam& adam);

// Binary layout: "HRCK", format version, stage tag, fingerprint, then every
// tensor (name, shape, trainable flag, raw little-endian doubles) in name
// order, then the optional optimizer moments. Equal contents give equal bytes.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Throws MissingArtifactError (with `missing_hint` appended) when the file does
// not exist, CheckpointError on a bad file, a stage other than `expected` or a
// fingerprint other than `fingerprint` (empty skips the check).
Checkpoint load_checkpoint(const std::filesystem::path& path, Stage expected, const std::string& fingerprint,
                           const std::string& missing_hint = {});

}  // namespace hiret
