#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hiret/graph.hpp"

namespace hiret {

enum class Activation { kSigmoid, kTanh };

/// y = x W^T + b over the trailing axis of x. W is [out, in], b is [out].
Var linear(Var x, Var weight, std::optional<Var> bias = std::nullopt);

Var activation(Var x, Activation kind);
Var sigmoid(Var x);
Var tanh(Var x);

/// Numerically stable softmax (max-subtracted) along `axis`.
Var softmax(Var x, std::size_t axis);

Var concat(std::span<const Var> xs, std::size_t axis);
Var concat(std::initializer_list<Var> xs, std::size_t axis = 0);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(Var x, Shape shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
// M[N, D] + v[D] broadcast over rows.
Var add_rows(Var matrix, Var row);

Var sum(Var x);
Var mean(Var x);
Var dot(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);

// Rows of table [V, D] selected by ids -> [ids.size(), D]. Ids >= V are a
// validation error (map to UNK first).
Var gather_rows(Var table, std::span<const int> ids);
Var embedding(Var table, int id);

/// Mean over both spatial axes of a [k, k, d] feature map -> [d].
Var avg_pool_spatial(Var map);

struct LstmState {
  Var h;
  Var c;
};

/// Standard LSTM step. weight is [4H, in + H] acting on concat(x, h), gate
/// order input, forget, candidate, output; bias is [4H].
LstmState lstm_cell(Var x, LstmState state, Var weight, Var bias);

/// Mean binary cross-entropy in logit form:
/// max(z, 0) - z t + log(1 + exp(-|z|)). Targets must lie in [0, 1].
Var bce_with_logits(Var logits, const Tensor& targets);

/// Mean softmax cross-entropy. logits is [V] (one target) or [T, V].
Var cross_entropy(Var logits, std::span<const int> targets);
Var cross_entropy(Var logits, int target);

}  // namespace hiret
