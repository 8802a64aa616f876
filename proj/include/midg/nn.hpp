// SPDX-License-Identifier: Apache-2.0
//
// Layer building blocks and the adaptive-moment optimizer shared by all modules.

#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "midg/autodiff/ops.hpp"
#include "midg/autodiff/tensor.hpp"
#include "midg/rng.hpp"

namespace midg::nn {

using ad::Graph;
using ad::Parameter;
using ad::Tensor;

template <std::floating_point T>
using ParamList = std::vector<Parameter<T>*>;

enum class Activation { None, Tanh, Relu, Sigmoid };

template <std::floating_point T>
Tensor<T> activate(const Tensor<T>& x, Activation act);

/// y = x W + b with x of shape (batch x in). Weights Xavier-uniform, bias zero.
template <std::floating_point T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> operator()(Graph<T>& g, const Tensor<T>& x);

  std::size_t in_features() const { return weight_.shape()[0]; }
  std::size_t out_features() const { return weight_.shape()[1]; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  void collect(ParamList<T>& out);

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Two-layer perceptron: Linear -> activation -> Linear (linear output).
template <std::floating_point T>
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Activation act,
       Rng& rng);

  Tensor<T> operator()(Graph<T>& g, const Tensor<T>& x);

  Linear<T>& first() { return first_; }
  Linear<T>& second() { return second_; }
  void collect(ParamList<T>& out);

 private:
  Linear<T> first_;
  Linear<T> second_;
  Activation act_ = Activation::Tanh;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected first/second moment descent. State is keyed by position in the
/// parameter list, which must be the same list (same order) on every step.
template <std::floating_point T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Parameter<T>* const> params);
  std::size_t steps() const { return steps_; }

 private:
  AdamOptions options_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

template <std::floating_point T>
void zero_grad(std::span<Parameter<T>* const> params) {
  for (auto* p : params) p->zero_grad();
}

template <std::floating_point T>
std::size_t count_parameters(std::span<Parameter<T>* const> params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->size();
  return n;
}

}  // namespace midg::nn
