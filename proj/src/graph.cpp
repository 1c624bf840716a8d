#include "eegtl/graph.hpp"

#include <algorithm>

namespace eegtl {

template <class T>
Var Graph<T>::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <class T>
Var Graph<T>::parameter(Tensor& target) {
  Node node;
  node.value = target;
  node.value.drop_grad();
  node.bound = &target;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <class T>
Var Graph<T>::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [this](Var v) { return nodes_.at(v.id).requires_grad; });
  if (node.requires_grad) node.backward = std::move(backward);
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <class T>
std::vector<T>& Graph<T>::grad(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), T{0});
  return node.grad;
}

template <class T>
void Graph<T>::backward(Var loss) {
  if (nodes_.at(loss.id).value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     shape_to_string(nodes_[loss.id].value.shape()));
  }
  for (Node& node : nodes_) node.grad.clear();
  grad(loss)[0] = T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(*this);
  }
  for (Node& node : nodes_) {
    if (node.bound) node.bound->zero_grad();
  }
  // A tensor bound more than once accumulates the contributions of every leaf.
  for (Node& node : nodes_) {
    if (!node.bound || node.grad.empty()) continue;
    auto target = node.bound->grad();
    for (std::size_t j = 0; j < target.size(); ++j) target[j] += node.grad[j];
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace eegtl
