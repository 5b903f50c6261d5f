#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "cxr/tensor.hpp"

namespace cxr {

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
  friend bool operator==(Var, Var) = default;
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in execution order, so every node's inputs precede it and
/// a single reverse sweep visits them in a valid order. Leaves are either
/// constants (data, frozen statistics) or parameters (receive gradients).
template <typename T>
class Tape {
 public:
  /// Propagates the gradient of a node's output into its inputs' accumulators.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& output_grad)>;

  Var constant(Tensor<T> value);
  Var parameter(Tensor<T> value);

  /// Appends an operation node. `backward` may be empty for non-differentiable outputs.
  Var record(std::string op, Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(std::string op, Tensor<T> value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor<T>& value(Var v) const { return node(v).value; }
  const std::string& op(Var v) const { return node(v).op; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::vector<Var> inputs(Var v) const;

  /// Gradient accumulated into `v` by the last backward(). Parameters that are
  /// not on any path to the loss hold zeros of their value's shape.
  const Tensor<T>& grad(Var v) const;

  /// Mutable gradient buffer of `v`, zero-initialized on first access. Only
  /// meant for BackwardFn implementations.
  Tensor<T>& grad_buffer(Var v);

  /// Runs the reverse sweep from a scalar (single-element) node.
  void backward(Var loss);

 private:
  struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_parameter = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cxr
