#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hiret/rng.hpp"
#include "hiret/tensor.hpp"

namespace hiret {

// Named learnable tensors. Iteration is lexicographic by name, which fixes the
// order of every reduction over parameters (gradient norms, checkpoints).
class ParameterStore {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  // Registers `value` under `name`. Trainable entries carry a gradient slot.
  Tensor& add(const std::string& name, Tensor value, bool trainable = true);

  // Weight matrix [out, in] drawn from U(-1/sqrt(in), 1/sqrt(in)).
  Tensor& add_weight(const std::string& name, std::size_t out, std::size_t in, Rng& rng);
  Tensor& add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  Tensor& add_zeros(const std::string& name, Shape shape);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::vector<std::string> names(std::string_view prefix = {}) const;
  std::vector<std::string> trainable_names() const;

  void zero_grad();
  // Enables or disables gradients for every entry whose name starts with prefix.
  void set_trainable(std::string_view prefix, bool trainable);
  void erase_prefix(std::string_view prefix);

  // Copies every entry under one of the prefixes (values only).
  ParameterStore subset(const std::vector<std::string>& prefixes) const;
  // Overwrites or inserts the entries of `other`, keeping this store's
  // trainable flags for names it already had.
  void merge(const ParameterStore& other);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_values() const;
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }

 private:
  Map entries_;
};

bool starts_with_any(std::string_view name, const std::vector<std::string>& prefixes);

}  // namespace hiret
