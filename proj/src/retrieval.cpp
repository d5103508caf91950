#include "hiret/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "hiret/errors.hpp"

namespace hiret {

void RetrievalPool::add(PoolEntry entry, std::span<const double> embedding) {
  if (frozen_) throw UsageError("cannot add to a frozen retrieval pool");
  if (embedding.size() != dim_) {
    throw DimensionError("pool embedding has " + std::to_string(embedding.size()) + " values, expected " +
                         std::to_string(dim_));
  }
  if (!index_.emplace(entry.id, entries_.size()).second) {
    throw ValidationError("duplicate pool id " + std::to_string(entry.id));
  }
  entries_.push_back(std::move(entry));
  embeddings_.insert(embeddings_.end(), embedding.begin(), embedding.end());
}

std::optional<std::size_t> RetrievalPool::find(std::int64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool excluded(const PoolEntry& e, std::optional<std::int64_t> exclude) {
  return exclude && (e.id == *exclude || e.source == *exclude);
}

// Strict "ranks before": larger logit first, then smaller id.
bool ranks_before(const Hit& a, const Hit& b) {
  if (a.logit != b.logit) return a.logit > b.logit;
  return a.id < b.id;
}

}  // namespace

std::size_t eligible_count(const RetrievalPool& pool, std::optional<std::int64_t> exclude) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) n += excluded(pool.entry(i), exclude) ? 0 : 1;
  return n;
}

std::vector<Hit> top_k(const RetrievalPool& pool, std::span<const double> query, std::size_t k,
                       std::optional<std::int64_t> exclude) {
  if (query.size() != pool.dim()) {
    throw DimensionError("query has " + std::to_string(query.size()) + " values, pool holds " +
                         std::to_string(pool.dim()));
  }
  const std::size_t available = eligible_count(pool, exclude);
  if (k == 0 || k > available) {
    throw ValidationError("cannot retrieve " + std::to_string(k) + " items from a pool with " +
                          std::to_string(available) + " eligible entries");
  }
  // Bounded heap whose top is the current worst of the best k.
  std::priority_queue<Hit, std::vector<Hit>, decltype(&ranks_before)> heap(&ranks_before);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const PoolEntry& e = pool.entry(i);
    if (excluded(e, exclude)) continue;
    const auto emb = pool.embedding(i);
    double logit = 0.0;
    for (std::size_t j = 0; j < emb.size(); ++j) logit += emb[j] * query[j];
    Hit h{i, e.id, logit, 0.0};
    if (heap.size() < k) {
      heap.push(h);
    } else if (ranks_before(h, heap.top())) {
      heap.pop();
      heap.push(h);
    }
  }
  std::vector<Hit> out;
  out.reserve(k);
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  for (Hit& h : out) h.score = 1.0 / (1.0 + std::exp(-h.logit));
  return out;
}

}  // namespace hiret
