// SPDX-License-Identifier: Apache-2.0
#include "midg/nn.hpp"

#include <cmath>

#include "midg/errors.hpp"

namespace midg::nn {

template <std::floating_point T>
Tensor<T> activate(const Tensor<T>& x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Relu: return ad::relu(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
  }
  return x;
}

template <std::floating_point T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight_(name + ".weight", {in, out}), bias_(name + ".bias", {1, out}) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (T& w : weight_.values()) w = static_cast<T>(rng.uniform(-limit, limit));
}

template <std::floating_point T>
Tensor<T> Linear<T>::operator()(Graph<T>& g, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw ShapeError(weight_.name() + ": expected input (batch x " + std::to_string(in_features()) +
                     "), got " + ad::to_string(x.shape()));
  }
  return ad::matmul(x, g.param(weight_)) + g.param(bias_);
}

template <std::floating_point T>
void Linear<T>::collect(ParamList<T>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <std::floating_point T>
Mlp2<T>::Mlp2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
              Activation act, Rng& rng)
    : first_(name + ".l1", in, hidden, rng), second_(name + ".l2", hidden, out, rng), act_(act) {}

template <std::floating_point T>
Tensor<T> Mlp2<T>::operator()(Graph<T>& g, const Tensor<T>& x) {
  return second_(g, activate(first_(g, x), act_));
}

template <std::floating_point T>
void Mlp2<T>::collect(ParamList<T>& out) {
  first_.collect(out);
  second_.collect(out);
}

template <std::floating_point T>
void Adam<T>::step(std::span<Parameter<T>* const> params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("Adam: parameter list changed between steps");
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k]->values();
    const auto grad = params[k]->grad();
    auto& m = m_[k];
    auto& v = v_[k];
    if (m.size() != values.size()) throw ContractError("Adam: parameter size changed between steps");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double update = options_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
      values[i] = static_cast<T>(values[i] - update);
    }
  }
}

template Tensor<float> activate(const Tensor<float>&, Activation);
template Tensor<double> activate(const Tensor<double>&, Activation);
template class Linear<float>;
template class Linear<double>;
template class Mlp2<float>;
template class Mlp2<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace midg::nn
