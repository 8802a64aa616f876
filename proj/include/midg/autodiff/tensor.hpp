// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode differentiation.
//
// A Graph is a tape of nodes appended in creation order, so node ids are a
// topological order by construction and backward is a single reverse sweep.
// Tensors are lightweight handles (graph pointer + node id). Parameters live
// outside any graph; Graph::param() binds one as a leaf and backward()
// accumulates into Parameter::grad().
//
// Graphs are rebuilt for every forward pass and are confined to one thread.

#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace midg::ad {

using Shape = std::vector<std::size_t>;
using NodeId = std::size_t;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

enum class OpKind : std::uint8_t {
  Input,
  Param,
  MatMul,
  Add,
  Sub,
  Mul,
  Relu,
  Sigmoid,
  Tanh,
  Exp,
  Log,
  Square,
  Scale,
  AddScalar,
  Softmax,
  Concat,
  Slice,
  Sum,
  Mean,
  Dropout,
  GradReverse,
  Clamp,
};

std::string_view op_name(OpKind kind);

template <std::floating_point T>
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Shape shape);

  const std::string& name() const { return name_; }
  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

  void zero_grad();
  void fill(T value);

 private:
  std::string name_;
  Shape shape_;
  std::vector<T> values_;
  std::vector<T> grad_;
};

template <std::floating_point T>
class Graph;

template <std::floating_point T>
class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  NodeId id() const { return id_; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const;
  std::span<const T> values() const;
  std::span<const T> grad() const;
  /// Value of a single-element tensor.
  T item() const;

 private:
  friend class Graph<T>;
  Tensor(Graph<T>* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  NodeId id_ = 0;
};

template <std::floating_point T>
class Graph {
 public:
  /// View handed to a node's backward closure: upstream gradient of the node and
  /// lazily allocated accumulators for each of its inputs.
  class BackwardContext {
   public:
    std::span<const T> grad_out() const;
    std::span<const T> value_out() const;
    std::span<const T> value_in(std::size_t slot) const;
    const Shape& shape_in(std::size_t slot) const;
    std::span<T> grad_in(std::size_t slot);

   private:
    friend class Graph<T>;
    BackwardContext(const Graph& graph, std::vector<std::vector<T>>& adjoints, NodeId self)
        : graph_(graph), adjoints_(adjoints), self_(self) {}

    const Graph& graph_;
    std::vector<std::vector<T>>& adjoints_;
    NodeId self_;
  };

  using BackwardFn = std::function<void(BackwardContext&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  /// Leaf holding data. Its gradient is recorded but not routed anywhere else.
  Tensor<T> input(Shape shape, std::vector<T> values);
  Tensor<T> scalar(T value) { return input({1}, {value}); }
  Tensor<T> zeros(Shape shape);
  /// Leaf bound to a parameter. Repeated binds within one graph share a node.
  Tensor<T> param(Parameter<T>& parameter);

  /// Appends an op node. Used by the op library; `inputs` must already exist.
  Tensor<T> record(OpKind kind, Shape shape, std::vector<T> values, std::vector<NodeId> inputs,
                   BackwardFn backward);

  /// Accumulates d(loss)/d(node) into every node reachable from `loss` and into the
  /// bound parameters. Repeated calls accumulate.
  void backward(const Tensor<T>& loss);

  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  const Shape& shape(NodeId id) const { return nodes_[id].shape; }
  std::span<const T> value(NodeId id) const { return nodes_[id].value; }
  std::span<const T> grad(NodeId id) const { return nodes_[id].grad; }

 private:
  struct Node {
    OpKind kind;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    Parameter<T>* parameter = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, NodeId> bound_;
};

template <std::floating_point T>
const Shape& Tensor<T>::shape() const {
  return graph_->shape(id_);
}

template <std::floating_point T>
std::size_t Tensor<T>::size() const {
  return graph_->value(id_).size();
}

template <std::floating_point T>
std::span<const T> Tensor<T>::values() const {
  return graph_->value(id_);
}

template <std::floating_point T>
std::span<const T> Tensor<T>::grad() const {
  return graph_->grad(id_);
}

}  // namespace midg::ad
