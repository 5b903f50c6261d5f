#include "cxr/tape.hpp"

namespace cxr {

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  if (!value.all_finite()) throw NumericalError("non-finite value in constant input");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(Tensor<T> value) {
  if (!value.all_finite()) throw NumericalError("non-finite value in parameter");
  Node n;
  n.op = "parameter";
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_parameter = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(std::string op, Tensor<T> value, std::initializer_list<Var> inputs,
                    BackwardFn backward) {
  return record(std::move(op), std::move(value), std::vector<Var>(inputs), std::move(backward));
}

template <typename T>
Var Tape<T>::record(std::string op, Tensor<T> value, const std::vector<Var>& inputs,
                    BackwardFn backward) {
  if (!value.all_finite()) throw NumericalError("non-finite output from " + op);
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw Error("tape input refers to a node that does not exist yet");
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
std::vector<Var> Tape<T>::inputs(Var v) const {
  std::vector<Var> out;
  for (std::size_t id : node(v).inputs) out.push_back(Var{id});
  return out;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) throw Error("no gradient recorded for node " + std::to_string(v.id));
  return n.grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor<T>();
  root.grad = Tensor<T>(root.value.shape(), T{1});

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (n.is_parameter && n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  }
}

template <typename T>
auto Tape<T>::node(Var v) const -> const Node& {
  if (v.id >= nodes_.size()) throw Error("invalid tape variable " + std::to_string(v.id));
  return nodes_[v.id];
}

template <typename T>
auto Tape<T>::node(Var v) -> Node& {
  if (v.id >= nodes_.size()) throw Error("invalid tape variable " + std::to_string(v.id));
  return nodes_[v.id];
}

template class Tape<float>;
template class Tape<double>;

}  // namespace cxr
