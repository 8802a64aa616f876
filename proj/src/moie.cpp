// SPDX-License-Identifier: Apache-2.0
#include "midg/moie.hpp"

#include <cmath>

#include "midg/autodiff/ops.hpp"
#include "midg/errors.hpp"

namespace midg::moie {

void MoIEConfig::validate() const {
  if (experts == 0) throw ConfigError("moie: need at least one expert");
  if (d_input == 0 || router_hidden == 0 || expert_hidden == 0 || d_repr == 0 || disc_hidden == 0 ||
      head_hidden == 0) {
    throw ConfigError("moie: all dimensions must be positive");
  }
  if (!(lambda >= 0.0)) throw ConfigError("moie: lambda must be nonnegative");
}

double grl_warmup(double progress) { return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0; }

template <std::floating_point T>
Tensor<T> binary_cross_entropy(const Tensor<T>& probs, std::span<const int> labels) {
  if (labels.empty()) throw ContractError("binary_cross_entropy: empty batch");
  if (probs.rank() != 2 || probs.dim(1) != 1 || probs.dim(0) != labels.size()) {
    throw ShapeError("binary_cross_entropy: probabilities " + ad::to_string(probs.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<T> d(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ContractError("binary_cross_entropy: labels must be 0 or 1");
    d[i] = static_cast<T>(labels[i]);
  }
  auto& g = probs.graph();
  const auto target = g.input(probs.shape(), d);
  std::vector<T> ones(d.size(), T(1));
  const auto not_target = g.input(probs.shape(), std::move(ones)) - target;
  const auto p = ad::clamp(probs, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
  const auto log_p = ad::log(p);
  const auto log_not_p = ad::log(ad::add_scalar(ad::scale(p, T(-1)), T(1)));
  return ad::scale(ad::mean(target * log_p + not_target * log_not_p), T(-1));
}

template <std::floating_point T>
MixtureOfInvariantExperts<T>::MixtureOfInvariantExperts(const std::string& name, const MoIEConfig& config,
                                                        Rng& rng)
    : config_(config) {
  config_.validate();
  const auto& c = config_;
  router_ = nn::Mlp2<T>(name + ".router", c.d_input, c.router_hidden, c.experts, nn::Activation::Tanh, rng);
  experts_.reserve(c.experts);
  for (std::size_t k = 0; k < c.experts; ++k) {
    experts_.emplace_back(name + ".expert" + std::to_string(k), c.d_input, c.expert_hidden, c.d_repr,
                          nn::Activation::Tanh, rng);
  }
  disc_ = nn::Mlp2<T>(name + ".disc", c.d_repr, c.disc_hidden, 1, nn::Activation::Tanh, rng);
  head_ = nn::Mlp2<T>(name + ".head_in", c.d_repr, c.head_hidden, 1, nn::Activation::Tanh, rng);
}

template <std::floating_point T>
void MixtureOfInvariantExperts<T>::set_lambda(double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("moie: lambda must be nonnegative");
  config_.lambda = lambda;
}

template <std::floating_point T>
nn::Mlp2<T>& MixtureOfInvariantExperts<T>::expert(std::size_t k) {
  if (k >= experts_.size()) {
    throw ContractError("expert index " + std::to_string(k) + " out of range for " +
                        std::to_string(experts_.size()) + " experts");
  }
  return experts_[k];
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::route(Graph<T>& g, const Tensor<T>& fused) {
  return ad::softmax(router_(g, fused), 1);
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::expert_forward(Graph<T>& g, const Tensor<T>& fused, std::size_t k) {
  return expert(k)(g, fused);
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::forward(Graph<T>& g, const Tensor<T>& fused) {
  const auto weights = route(g, fused);
  Tensor<T> mixed;
  for (std::size_t k = 0; k < experts_.size(); ++k) {
    const auto term = ad::slice(weights, 1, k, k + 1) * expert_forward(g, fused, k);
    mixed = mixed.valid() ? mixed + term : term;
  }
  return mixed;
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::discriminate(Graph<T>& g, const Tensor<T>& repr) {
  return ad::sigmoid(disc_(g, repr));
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::domain_loss(Graph<T>& g, const Tensor<T>& repr,
                                                    std::span<const int> domains) {
  if (domains.empty()) throw ContractError("loss_in: empty batch");
  const auto reversed = ad::grad_reverse(repr, static_cast<T>(config_.lambda));
  return binary_cross_entropy(discriminate(g, reversed), domains);
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::loss_in(Graph<T>& g, const Tensor<T>& fused,
                                                std::span<const int> domains) {
  if (domains.empty()) throw ContractError("loss_in: empty batch");
  return domain_loss(g, forward(g, fused), domains);
}

template <std::floating_point T>
Tensor<T> MixtureOfInvariantExperts<T>::predict_in(Graph<T>& g, const Tensor<T>& repr) {
  return head_(g, repr);
}

template <std::floating_point T>
void MixtureOfInvariantExperts<T>::collect(nn::ParamList<T>& out) {
  collect_router_and_experts(out);
  disc_.collect(out);
  head_.collect(out);
}

template <std::floating_point T>
void MixtureOfInvariantExperts<T>::collect_router_and_experts(nn::ParamList<T>& out) {
  router_.collect(out);
  for (auto& e : experts_) e.collect(out);
}

template Tensor<float> binary_cross_entropy(const Tensor<float>&, std::span<const int>);
template Tensor<double> binary_cross_entropy(const Tensor<double>&, std::span<const int>);
template class MixtureOfInvariantExperts<float>;
template class MixtureOfInvariantExperts<double>;

}  // namespace midg::moie
