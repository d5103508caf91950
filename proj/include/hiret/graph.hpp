#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hiret/params.hpp"
#include "hiret/tensor.hpp"

namespace hiret {

class Graph;

// Handle to a value recorded on a Graph. Cheap to copy; valid while the graph
// lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }

  const Shape& shape() const;
  std::size_t numel() const;
  std::span<const double> value() const;
  double item() const;
  Tensor tensor() const;
  // Gradient accumulated by Graph::backward; empty when the value does not
  // depend on anything trainable.
  std::span<const double> grad() const;

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// tape backwards is a valid reverse topological order; a fresh graph is built
// for every forward pass.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

  Graph() = default;
  // Parameters looked up by name come from `store`. With record=false no
  // backward closures are kept and nothing tracks gradients (inference).
  explicit Graph(ParameterStore& store, bool record = true) : store_(&store), record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf owned by the graph that receives a gradient (used to check gradients
  // with respect to inputs).
  Var input(Tensor value);
  // Binds an external tensor without copying. Its gradient slot, if any,
  // receives accumulated gradients on backward().
  Var param(Tensor& tensor);
  Var param(std::string_view name);

  void backward(const Var& loss);

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // --- op-author interface ------------------------------------------------
  const Shape& shape(std::uint32_t id) const { return nodes_[id].shape; }
  const double* value(std::uint32_t id) const;
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  // Lazily zero-initialised gradient buffer; nullptr if the node needs none.
  double* grad(std::uint32_t id);
  bool has_grad(std::uint32_t id) const;
  Var emit(Shape shape, std::vector<double> values, std::initializer_list<Var> parents, BackwardFn backward,
           const char* op);
  Var emit(Shape shape, std::vector<double> values, std::span<const Var> parents, BackwardFn backward,
           const char* op);

 private:
  struct Node {
    Shape shape;
    std::vector<double> owned;
    const double* external = nullptr;
    std::vector<double> grad;
    double* external_grad = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  ParameterStore* store_ = nullptr;
  bool record_ = true;
  std::deque<Node> nodes_;  // deque: references to nodes survive appends
  std::unordered_map<const Tensor*, std::uint32_t> bound_;
};

}  // namespace hiret
