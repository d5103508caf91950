#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hiret/tensor.hpp"

namespace hiret {

// One retrievable item. `source` is the report an item came from (the item's
// own id for report pools).
struct PoolEntry {
  std::int64_t id = 0;
  std::int64_t source = 0;
  std::vector<std::vector<int>> sentences;  // token ids; one sentence for sentence pools
};

// Exact inner-product index. Embeddings are stored contiguously.
class RetrievalPool {
 public:
  explicit RetrievalPool(std::size_t dim) : dim_(dim) {}

  void add(PoolEntry entry, std::span<const double> embedding);
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const PoolEntry& entry(std::size_t i) const { return entries_[i]; }
  std::span<const double> embedding(std::size_t i) const { return {embeddings_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(std::int64_t id) const;

 private:
  std::size_t dim_;
  bool frozen_ = false;
  std::vector<PoolEntry> entries_;
  std::vector<double> embeddings_;
  std::unordered_map<std::int64_t, std::size_t> index_;
};

struct Hit {
  std::size_t index = 0;  // position in the pool
  std::int64_t id = 0;
  double logit = 0.0;  // inner product
  double score = 0.0;  // sigmoid(logit)
};

// Exact top-k by inner product, ties broken by ascending id. Entries whose
// id or source equals `exclude` are skipped. Throws ValidationError when k
// exceeds the number of eligible entries.
std::vector<Hit> top_k(const RetrievalPool& pool, std::span<const double> query, std::size_t k,
                       std::optional<std::int64_t> exclude = std::nullopt);

// Number of entries eligible under `exclude`.
std::size_t eligible_count(const RetrievalPool& pool, std::optional<std::int64_t> exclude);

}  // namespace hiret
