#include "hiret/encoders.hpp"

#include <cmath>
#include <string>

#include "hiret/errors.hpp"
#include "hiret/ops.hpp"

namespace hiret {

namespace {

std::string key(const char* prefix, const char* name) { return std::string(prefix) + name; }

}  // namespace

void init_image_encoder(ParameterStore& store, const EncoderDims& dims, Rng& rng) {
  if (dims.cells == 0 || dims.grid % dims.cells != 0) {
    throw ConfigError("image grid " + std::to_string(dims.grid) + " is not divisible by " + std::to_string(dims.cells));
  }
  const std::size_t in = dims.patch() * dims.patch();
  store.add_weight(key(kImagePrefix, "W1"), dims.patch_hidden, in, rng);
  store.add_zeros(key(kImagePrefix, "b1"), {dims.patch_hidden});
  store.add_weight(key(kImagePrefix, "W2"), dims.d, dims.patch_hidden, rng);
  store.add_zeros(key(kImagePrefix, "b2"), {dims.d});
}

const char* text_prefix(TextLevel level) { return level == TextLevel::kReport ? kReportPrefix : kSentencePrefix; }

std::string token_table(TextLevel level) { return key(text_prefix(level), "embed"); }

void init_text_encoder(ParameterStore& store, TextLevel level, const EncoderDims& dims, Rng& rng) {
  const char* prefix = text_prefix(level);
  store.add_uniform(token_table(level), {dims.vocab, dims.d}, 1.0 / std::sqrt(static_cast<double>(dims.d)), rng);
  store.add_weight(key(prefix, "lstm.W"), 4 * dims.text_hidden, dims.d + dims.text_hidden, rng);
  store.add_zeros(key(prefix, "lstm.b"), {4 * dims.text_hidden});
  store.add_weight(key(prefix, "proj.W"), dims.d, dims.text_hidden, rng);
  store.add_zeros(key(prefix, "proj.b"), {dims.d});
}

Var encode_image(Graph& g, const Tensor& view, const EncoderDims& dims) {
  if (dims.cells == 0 || dims.grid % dims.cells != 0) {
    throw ConfigError("image grid " + std::to_string(dims.grid) + " is not divisible by " + std::to_string(dims.cells));
  }
  if (view.shape() != Shape{dims.grid, dims.grid}) {
    throw DimensionError("encode_image: expected a [" + std::to_string(dims.grid) + "," + std::to_string(dims.grid) +
                         "] view, got " + shape_str(view.shape()));
  }
  const std::size_t k = dims.cells;
  const std::size_t p = dims.patch();
  Tensor patches({k * k, p * p});
  for (std::size_t cy = 0; cy < k; ++cy)
    for (std::size_t cx = 0; cx < k; ++cx)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          patches.at(cy * k + cx, y * p + x) = view.at(cy * p + y, cx * p + x);
  Var hidden = tanh(linear(g.constant(std::move(patches)), g.param(key(kImagePrefix, "W1")),
                           g.param(key(kImagePrefix, "b1"))));
  Var out = linear(hidden, g.param(key(kImagePrefix, "W2")), g.param(key(kImagePrefix, "b2")));
  return reshape(out, {k, k, dims.d});
}

Var encode_text(Graph& g, std::span<const int> tokens, TextLevel level, const EncoderDims& dims) {
  if (tokens.empty()) throw ValidationError("encode_text: empty token sequence");
  const bool report = level == TextLevel::kReport;
  const std::size_t limit = report ? dims.report_max_tokens : dims.sentence_max_tokens;
  const auto used = tokens.first(std::min(limit, tokens.size()));
  const char* prefix = text_prefix(level);

  Var embedded = gather_rows(g.param(token_table(level)), used);
  Var w = g.param(key(prefix, "lstm.W"));
  Var b = g.param(key(prefix, "lstm.b"));
  const Var zero = g.constant(Tensor({dims.text_hidden}));
  LstmState state{zero, zero};
  for (std::size_t t = 0; t < used.size(); ++t) {
    state = lstm_cell(reshape(slice(embedded, 0, t, 1), {dims.d}), state, w, b);
  }
  return linear(state.h, g.param(key(prefix, "proj.W")), g.param(key(prefix, "proj.b")));
}

}  // namespace hiret
