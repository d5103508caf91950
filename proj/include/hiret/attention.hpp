#pragma once

#include <span>
#include <string>

#include "hiret/graph.hpp"
#include "hiret/params.hpp"
#include "hiret/rng.hpp"

namespace hiret {

// Pathological spatial attention over a [k, k, d] map, conditioned on a
// q-dim vector. Parameters under `prefix`: Wv [A, d], Wc [A, q], Wa [1, A].
void init_spatial_attention(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t q,
                            std::size_t attn_dim, Rng& rng);

// a(x, y) = Wa tanh(Wv map(x, y) + Wc condition), flattened to [k*k].
Var spatial_scores(Graph& g, Var map, Var condition, const std::string& prefix);
// The two halves of spatial_scores. Wv map(x, y) does not depend on the
// condition, so a decoder computes it once per sample: [k*k, A].
Var project_cells(Graph& g, Var map, const std::string& prefix);
Var spatial_scores_projected(Graph& g, Var projected, Var condition, const std::string& prefix);
// Softmax of the scores over all k*k cells.
Var spatial_weights(Var scores);
// sum over cells of alpha(x, y) * map(x, y) -> [d].
Var attend_spatial(Var map, Var alpha);

struct SpatialResult {
  Var alpha;     // [k*k]
  Var attended;  // [d]
};
SpatialResult spatial_attention(Graph& g, Var map, Var condition, const std::string& prefix);

// View fusion: concat(v'_1 .. v'_b) W_f, with W_f stored as [d, b*d] under
// prefix + "Wf".
void init_view_fusion(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t views, Rng& rng);
Var fuse_views(Graph& g, std::span<const Var> attended, const std::string& prefix, std::size_t views);

// Multi-query attention. Every query row attends independently over the value
// items; the per-query results are concatenated and projected to d.
// Parameters under prefix: WK [d, d], WV [d, d], WO [d, Q*d].
void init_multi_query(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t queries,
                      Rng& rng);

// Projections of the value items that do not depend on the anchor, so the
// word loop can reuse them for every anchor.
struct MultiQueryValues {
  Var keys;    // values WK^T, [L, d]
  Var values;  // values WV^T, [L, d]
};
MultiQueryValues prepare_multi_query(Graph& g, Var values, const std::string& prefix);

struct MultiQueryResult {
  Var output;   // [d]
  Var weights;  // [Q, L]
};
// K_j = tanh((value_j + anchor) WK^T); attn_i = softmax(Q_i K^T / sqrt(d)) V;
// output = concat(attn_1..attn_Q) WO^T.
MultiQueryResult multi_query_attention(Graph& g, Var queries, Var anchor, const MultiQueryValues& prepared,
                                       const std::string& prefix);
MultiQueryResult multi_query_attention(Graph& g, Var queries, Var anchor, Var values, const std::string& prefix);

}  // namespace hiret
