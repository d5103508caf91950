#include "hiret/graph.hpp"

#include <cmath>

#include "hiret/errors.hpp"

namespace hiret {

const Shape& Var::shape() const { return graph_->shape(id_); }

std::size_t Var::numel() const { return shape_numel(graph_->shape(id_)); }

std::span<const double> Var::value() const { return {graph_->value(id_), numel()}; }

double Var::item() const {
  if (numel() != 1) throw UsageError("item() on non-scalar of shape " + shape_str(shape()));
  return graph_->value(id_)[0];
}

Tensor Var::tensor() const {
  auto v = value();
  return Tensor(shape(), std::vector<double>(v.begin(), v.end()));
}

std::span<const double> Var::grad() const {
  if (!graph_->has_grad(id_)) return {};
  return {graph_->grad(id_), numel()};
}

Var Graph::constant(Tensor value) {
  Node node;
  node.shape = value.shape();
  node.owned.assign(value.values().begin(), value.values().end());
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::input(Tensor value) {
  Var v = constant(std::move(value));
  nodes_[v.id()].needs_grad = record_;
  return v;
}

Var Graph::param(Tensor& tensor) {
  if (auto it = bound_.find(&tensor); it != bound_.end()) return {this, it->second};
  Node node;
  node.shape = tensor.shape();
  node.external = tensor.data();
  if (record_ && tensor.requires_grad()) {
    node.needs_grad = true;
    node.external_grad = tensor.grad().data();
  }
  nodes_.push_back(std::move(node));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  bound_.emplace(&tensor, id);
  return {this, id};
}

Var Graph::param(std::string_view name) {
  if (store_ == nullptr) throw UsageError("graph has no parameter store to resolve '" + std::string(name) + "'");
  return param(store_->at(name));
}

const double* Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? n.external : n.owned.data();
}

double* Graph::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.external_grad) return n.external_grad;
  if (n.grad.empty()) n.grad.assign(shape_numel(n.shape), 0.0);
  return n.grad.data();
}

bool Graph::has_grad(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.needs_grad && (n.external_grad != nullptr || !n.grad.empty());
}

Var Graph::emit(Shape shape, std::vector<double> values, std::initializer_list<Var> parents, BackwardFn backward,
                const char* op) {
  return emit(std::move(shape), std::move(values), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward), op);
}

Var Graph::emit(Shape shape, std::vector<double> values, std::span<const Var> parents, BackwardFn backward,
                const char* op) {
  for (double x : values) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite output from op '") + op + "'");
  }
  Node node;
  node.shape = std::move(shape);
  node.owned = std::move(values);
  if (record_) {
    for (const Var& p : parents) {
      if (&p.graph() != this) throw UsageError(std::string("op '") + op + "' mixes values from different graphs");
      if (nodes_[p.id()].needs_grad) node.needs_grad = true;
    }
    if (node.needs_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::backward(const Var& loss) {
  if (&loss.graph() != this) throw UsageError("backward() called with a value from another graph");
  if (loss.numel() != 1) throw UsageError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  if (!record_) throw UsageError("backward() on a graph built without recording");
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id())[0] += 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

}  // namespace hiret
