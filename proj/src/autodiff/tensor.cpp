// SPDX-License-Identifier: Apache-2.0
#include "midg/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "midg/errors.hpp"

namespace midg::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Square: return "square";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Softmax: return "softmax";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Dropout: return "dropout";
    case OpKind::GradReverse: return "grad_reverse";
    case OpKind::Clamp: return "clamp";
  }
  return "unknown";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

template <std::floating_point T>
Parameter<T>::Parameter(std::string name, Shape shape)
    : name_(std::move(name)), shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(numel(shape_), T(0));
  grad_.assign(values_.size(), T(0));
}

template <std::floating_point T>
void Parameter<T>::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), T(0));
}

template <std::floating_point T>
void Parameter<T>::fill(T value) {
  std::fill(values_.begin(), values_.end(), value);
}

template <std::floating_point T>
T Tensor<T>::item() const {
  const auto v = values();
  if (v.size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return v[0];
}

template <std::floating_point T>
std::span<const T> Graph<T>::BackwardContext::grad_out() const {
  return adjoints_[self_];
}

template <std::floating_point T>
std::span<const T> Graph<T>::BackwardContext::value_out() const {
  return graph_.value(self_);
}

template <std::floating_point T>
std::span<const T> Graph<T>::BackwardContext::value_in(std::size_t slot) const {
  return graph_.value(graph_.nodes_[self_].inputs[slot]);
}

template <std::floating_point T>
const Shape& Graph<T>::BackwardContext::shape_in(std::size_t slot) const {
  return graph_.shape(graph_.nodes_[self_].inputs[slot]);
}

template <std::floating_point T>
std::span<T> Graph<T>::BackwardContext::grad_in(std::size_t slot) {
  const NodeId id = graph_.nodes_[self_].inputs[slot];
  auto& buf = adjoints_[id];
  if (buf.empty()) buf.assign(graph_.nodes_[id].value.size(), T(0));
  return buf;
}

template <std::floating_point T>
Tensor<T> Graph<T>::input(Shape shape, std::vector<T> values) {
  check_shape(shape);
  if (values.size() != numel(shape)) {
    throw ShapeError("input of shape " + to_string(shape) + " needs " +
                     std::to_string(numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  return record(OpKind::Input, std::move(shape), std::move(values), {}, nullptr);
}

template <std::floating_point T>
Tensor<T> Graph<T>::zeros(Shape shape) {
  const std::size_t n = numel(shape);
  return input(std::move(shape), std::vector<T>(n, T(0)));
}

template <std::floating_point T>
Tensor<T> Graph<T>::param(Parameter<T>& parameter) {
  if (auto it = bound_.find(&parameter); it != bound_.end()) return Tensor<T>(this, it->second);
  const auto values = parameter.values();
  Tensor<T> t = record(OpKind::Param, parameter.shape(), std::vector<T>(values.begin(), values.end()),
                       {}, nullptr);
  nodes_.back().parameter = &parameter;
  bound_.emplace(&parameter, t.id());
  return t;
}

template <std::floating_point T>
Tensor<T> Graph<T>::record(OpKind kind, Shape shape, std::vector<T> values,
                           std::vector<NodeId> inputs, BackwardFn backward) {
  const NodeId id = nodes_.size();
  for (NodeId in : inputs) {
    if (in >= id) throw ContractError("op input must precede its consumer");
  }
  Node node{kind, std::move(shape), std::move(values), {}, std::move(inputs), std::move(backward)};
  node.grad.assign(node.value.size(), T(0));
  nodes_.push_back(std::move(node));
  return Tensor<T>(this, id);
}

template <std::floating_point T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (loss.graph_ != this) throw ContractError("loss tensor belongs to a different graph");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  // Fresh adjoints per call; each is added into the persistent grad once its node is visited.
  std::vector<std::vector<T>> adjoints(loss.id() + 1);
  adjoints[loss.id()] = {T(1)};
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    auto& adj = adjoints[id];
    if (adj.empty()) continue;
    Node& node = nodes_[id];
    for (std::size_t i = 0; i < adj.size(); ++i) node.grad[i] += adj[i];
    if (node.parameter != nullptr) {
      auto g = node.parameter->grad();
      for (std::size_t i = 0; i < adj.size(); ++i) g[i] += adj[i];
    }
    if (node.backward) {
      BackwardContext ctx(*this, adjoints, id);
      node.backward(ctx);
    }
    std::vector<T>().swap(adj);
  }
}

template <std::floating_point T>
void Graph<T>::zero_grad() {
  for (auto& node : nodes_) std::fill(node.grad.begin(), node.grad.end(), T(0));
}

template class Parameter<float>;
template class Parameter<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace midg::ad
