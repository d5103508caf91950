#pragma once

#include <span>
#include <string>

#include "hiret/graph.hpp"
#include "hiret/params.hpp"
#include "hiret/rng.hpp"

namespace hiret {

struct EncoderDims {
  std::size_t grid = 32;
  std::size_t cells = 4;  // k
  std::size_t d = 64;
  std::size_t patch_hidden = 64;
  std::size_t vocab = 4;
  std::size_t text_hidden = 64;
  std::size_t report_max_tokens = 128;
  std::size_t sentence_max_tokens = 32;

  std::size_t patch() const { return grid / cells; }
};

enum class TextLevel { kReport, kSentence };

// Parameter prefixes. Each text encoder owns its token table ("<prefix>embed").
inline constexpr const char* kImagePrefix = "enc.img.";
inline constexpr const char* kReportPrefix = "enc.rep.";
inline constexpr const char* kSentencePrefix = "enc.sent.";

void init_image_encoder(ParameterStore& store, const EncoderDims& dims, Rng& rng);
void init_text_encoder(ParameterStore& store, TextLevel level, const EncoderDims& dims, Rng& rng);
const char* text_prefix(TextLevel level);
std::string token_table(TextLevel level);

// [G, G] view -> [k, k, d] feature map. Each (G/k)^2 patch goes through the
// same linear -> tanh -> linear perceptron.
Var encode_image(Graph& g, const Tensor& view, const EncoderDims& dims);

// Token ids -> [d]: embedding, one recurrent pass from a zero state, final
// hidden state projected to d. Sequences longer than the level's maximum keep
// their leading tokens.
Var encode_text(Graph& g, std::span<const int> tokens, TextLevel level, const EncoderDims& dims);

}  // namespace hiret
