// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Binary elementwise ops broadcast numpy-style over
// tensors of equal rank: each axis must match or have extent 1 on one side.
// Reductions over an axis keep that axis with extent 1.

#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "midg/autodiff/tensor.hpp"
#include "midg/rng.hpp"

namespace midg::ad {

template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <std::floating_point T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <std::floating_point T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <std::floating_point T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <std::floating_point T>
Tensor<T> relu(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> tanh(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> exp(const Tensor<T>& x);
/// Throws ValueDomainError unless every element is strictly positive.
template <std::floating_point T>
Tensor<T> log(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> square(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <std::floating_point T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset);
/// Gradient passes only where lo <= x <= hi.
template <std::floating_point T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

/// Max-subtracted softmax along `axis`.
template <std::floating_point T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

template <std::floating_point T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);
template <std::floating_point T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, std::size_t axis) {
  const std::vector<Tensor<T>> v(parts);
  return concat<T>(std::span<const Tensor<T>>(v), axis);
}
/// Elements [begin, end) along `axis`.
template <std::floating_point T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);

/// Sum of all elements, shape {1}.
template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis);
template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& x);
template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis);

/// Inverted dropout. Returns `x` itself when not training or rate == 0.
/// The mask is drawn from a fresh stream of `rng`, so it depends only on the seed
/// and the order of stochastic ops in the forward pass.
template <std::floating_point T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, CounterRng& rng);

/// Identity forward; backward propagates -lambda * upstream.
template <std::floating_point T>
Tensor<T> grad_reverse(const Tensor<T>& x, T lambda);

template <std::floating_point T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <std::floating_point T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <std::floating_point T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}
template <std::floating_point T>
Tensor<T> operator*(T factor, const Tensor<T>& x) {
  return scale(x, factor);
}

}  // namespace midg::ad
