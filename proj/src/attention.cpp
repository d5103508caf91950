#include "hiret/attention.hpp"

#include <cmath>

#include "hiret/errors.hpp"
#include "hiret/ops.hpp"

namespace hiret {

void init_spatial_attention(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t q,
                            std::size_t attn_dim, Rng& rng) {
  store.add_weight(prefix + "Wv", attn_dim, d, rng);
  store.add_weight(prefix + "Wc", attn_dim, q, rng);
  store.add_weight(prefix + "Wa", 1, attn_dim, rng);
}

Var project_cells(Graph& g, Var map, const std::string& prefix) {
  const Shape& ms = map.shape();
  if (ms.size() != 3) throw DimensionError("spatial attention expects a [k,k,d] map, got " + shape_str(ms));
  return linear(reshape(map, {ms[0] * ms[1], ms[2]}), g.param(prefix + "Wv"));
}

Var spatial_scores_projected(Graph& g, Var projected, Var condition, const std::string& prefix) {
  Var cond = linear(condition, g.param(prefix + "Wc"));
  Var scores = linear(tanh(add_rows(projected, cond)), g.param(prefix + "Wa"));
  return reshape(scores, {projected.shape()[0]});
}

Var spatial_scores(Graph& g, Var map, Var condition, const std::string& prefix) {
  return spatial_scores_projected(g, project_cells(g, map, prefix), condition, prefix);
}

Var spatial_weights(Var scores) { return softmax(scores, 0); }

Var attend_spatial(Var map, Var alpha) {
  const Shape& ms = map.shape();
  if (ms.size() != 3 || alpha.numel() != ms[0] * ms[1]) {
    throw DimensionError("attend_spatial: weights " + shape_str(alpha.shape()) + " do not match map " +
                         shape_str(ms));
  }
  const std::size_t cells = ms[0] * ms[1];
  Var out = matmul(reshape(alpha, {1, cells}), reshape(map, {cells, ms[2]}));
  return reshape(out, {ms[2]});
}

SpatialResult spatial_attention(Graph& g, Var map, Var condition, const std::string& prefix) {
  Var alpha = spatial_weights(spatial_scores(g, map, condition, prefix));
  return {alpha, attend_spatial(map, alpha)};
}

void init_view_fusion(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t views, Rng& rng) {
  store.add_weight(prefix + "Wf", d, views * d, rng);
}

Var fuse_views(Graph& g, std::span<const Var> attended, const std::string& prefix, std::size_t views) {
  if (attended.size() != views) {
    throw ValidationError("fuse_views: expected " + std::to_string(views) + " views, got " +
                          std::to_string(attended.size()));
  }
  return linear(concat(attended, 0), g.param(prefix + "Wf"));
}

void init_multi_query(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t queries,
                      Rng& rng) {
  store.add_weight(prefix + "WK", d, d, rng);
  store.add_weight(prefix + "WV", d, d, rng);
  store.add_weight(prefix + "WO", d, queries * d, rng);
}

MultiQueryValues prepare_multi_query(Graph& g, Var values, const std::string& prefix) {
  if (values.shape().size() != 2 || values.shape()[0] == 0) {
    throw ValidationError("multi-query attention needs at least one value item");
  }
  return {linear(values, g.param(prefix + "WK")), linear(values, g.param(prefix + "WV"))};
}

MultiQueryResult multi_query_attention(Graph& g, Var queries, Var anchor, const MultiQueryValues& prepared,
                                       const std::string& prefix) {
  const std::size_t d = prepared.keys.shape()[1];
  if (queries.shape().size() != 2 || queries.shape()[1] != d) {
    throw DimensionError("multi-query attention: queries " + shape_str(queries.shape()) + " are not [Q," +
                         std::to_string(d) + "]");
  }
  // The anchor enters inside the nonlinearity. A purely additive anchor term
  // would shift every logit of a query by the same amount and cancel in the
  // softmax.
  Var keys = tanh(add_rows(prepared.keys, linear(anchor, g.param(prefix + "WK"))));
  Var logits = scale(matmul(queries, transpose(keys)), 1.0 / std::sqrt(static_cast<double>(d)));
  Var weights = softmax(logits, 1);
  Var attended = matmul(weights, prepared.values);
  Var output = linear(reshape(attended, {attended.numel()}), g.param(prefix + "WO"));
  return {output, weights};
}

MultiQueryResult multi_query_attention(Graph& g, Var queries, Var anchor, Var values, const std::string& prefix) {
  return multi_query_attention(g, queries, anchor, prepare_multi_query(g, values, prefix), prefix);
}

}  // namespace hiret
