#include "hiret/params.hpp"

#include <cmath>

#include "hiret/errors.hpp"

namespace hiret {

bool starts_with_any(std::string_view name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes) {
    if (name.starts_with(p)) return true;
  }
  return false;
}

Tensor& ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
  if (entries_.contains(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  value.set_requires_grad(trainable);
  return entries_.emplace(name, std::move(value)).first->second;
}

Tensor& ParameterStore::add_weight(const std::string& name, std::size_t out, std::size_t in, Rng& rng) {
  return add_uniform(name, {out, in}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

Tensor& ParameterStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& x : t.values()) x = rng.uniform(-bound, bound);
  return add(name, std::move(t));
}

Tensor& ParameterStore::add_zeros(const std::string& name, Shape shape) { return add(name, Tensor(std::move(shape))); }

bool ParameterStore::contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

Tensor& ParameterStore::at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParameterStore::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::names(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) {
    if (name.starts_with(prefix)) out.push_back(name);
  }
  return out;
}

std::vector<std::string> ParameterStore::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : entries_) {
    if (t.requires_grad()) out.push_back(name);
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

void ParameterStore::set_trainable(std::string_view prefix, bool trainable) {
  for (auto& [name, t] : entries_) {
    if (name.starts_with(prefix) && t.requires_grad() != trainable) t.set_requires_grad(trainable);
  }
}

void ParameterStore::erase_prefix(std::string_view prefix) {
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (it->first.starts_with(prefix)) {
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
}

ParameterStore ParameterStore::subset(const std::vector<std::string>& prefixes) const {
  ParameterStore out;
  for (const auto& [name, t] : entries_) {
    if (starts_with_any(name, prefixes)) out.add(name, Tensor(t.shape(), std::vector<double>(t.values().begin(), t.values().end())), t.requires_grad());
  }
  return out;
}

void ParameterStore::merge(const ParameterStore& other) {
  for (const auto& [name, t] : other.entries_) {
    Tensor copy(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      add(name, std::move(copy), t.requires_grad());
    } else {
      const bool trainable = it->second.requires_grad();
      copy.set_requires_grad(trainable);
      it->second = std::move(copy);
    }
  }
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

}  // namespace hiret
