#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "eegtl/tensor.hpp"

namespace eegtl {

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = 0;
};

/// Tape of operations recorded during a forward pass.
///
/// Nodes are appended in evaluation order, so creation order is a valid
/// topological order and backward() is a single reverse sweep. Leaves bound
/// to external tensors (parameters) receive their gradient on backward();
/// bound leaves that the loss does not reach get an all-zero gradient.
template <class T>
class Graph {
 public:
  using Tensor = BasicTensor<T>;
  using BackwardFn = std::function<void(Graph&)>;

  /// Constant leaf; never receives a gradient.
  Var constant(Tensor value);

  /// Leaf mirroring an external tensor; its gradient is written back into
  /// `target.grad()` by backward(). `target` must outlive the graph.
  Var parameter(Tensor& target);

  /// Appends an operation node. `backward` is only kept if some input needs a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient buffer of a node, allocated on first access.
  std::vector<T>& grad(Var v);
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar node. Throws ShapeError for non-scalar losses.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<T> grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    Tensor* bound = nullptr;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;  // stable references across record()
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace eegtl
