// SPDX-License-Identifier: Apache-2.0
//
// Mixture of Invariant Experts. A softmax router weighs K feedforward experts; the
// mixed representation is pushed through a gradient-reversal node into a domain
// discriminator, so one backward pass trains the discriminator to separate domains
// and the experts and router to confuse it.

#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "midg/autodiff/tensor.hpp"
#include "midg/nn.hpp"
#include "midg/rng.hpp"

namespace midg::moie {

using ad::Graph;
using ad::Tensor;

inline constexpr double kProbClamp = 1e-7;

struct MoIEConfig {
  std::size_t d_input = 24;
  std::size_t experts = 4;
  std::size_t router_hidden = 16;
  std::size_t expert_hidden = 32;
  std::size_t d_repr = 16;
  std::size_t disc_hidden = 16;
  std::size_t head_hidden = 16;
  double lambda = 1.0;

  void validate() const;
};

/// Warm-up 2 / (1 + e^(-10 p)) - 1 for training progress p in [0, 1].
double grl_warmup(double progress);

/// Mean binary cross-entropy of probabilities (batch x 1) against 0/1 labels, with
/// probabilities clamped to [1e-7, 1 - 1e-7] inside the logs.
template <std::floating_point T>
Tensor<T> binary_cross_entropy(const Tensor<T>& probs, std::span<const int> labels);

template <std::floating_point T>
class MixtureOfInvariantExperts {
 public:
  MixtureOfInvariantExperts() = default;
  MixtureOfInvariantExperts(const std::string& name, const MoIEConfig& config, Rng& rng);

  const MoIEConfig& config() const { return config_; }
  void set_lambda(double lambda);

  /// Router weights on the simplex, (batch x K).
  Tensor<T> route(Graph<T>& g, const Tensor<T>& fused);
  Tensor<T> expert_forward(Graph<T>& g, const Tensor<T>& fused, std::size_t k);
  /// sum_k g_k(x) * E_k(x), (batch x d_repr). All experts are evaluated.
  Tensor<T> forward(Graph<T>& g, const Tensor<T>& fused);

  /// P(representation came from the out-of-domain distribution), (batch x 1).
  Tensor<T> discriminate(Graph<T>& g, const Tensor<T>& repr);
  /// Discriminator BCE on representations routed through the gradient-reversal node.
  Tensor<T> domain_loss(Graph<T>& g, const Tensor<T>& repr, std::span<const int> domains);
  /// forward() followed by domain_loss(). Throws ContractError on an empty batch.
  Tensor<T> loss_in(Graph<T>& g, const Tensor<T>& fused, std::span<const int> domains);

  /// In-domain sentiment score, (batch x 1).
  Tensor<T> predict_in(Graph<T>& g, const Tensor<T>& repr);

  nn::Mlp2<T>& router() { return router_; }
  nn::Mlp2<T>& expert(std::size_t k);
  nn::Mlp2<T>& discriminator() { return disc_; }
  nn::Mlp2<T>& head() { return head_; }

  void collect(nn::ParamList<T>& out);
  void collect_router_and_experts(nn::ParamList<T>& out);

 private:
  MoIEConfig config_;
  nn::Mlp2<T> router_;
  std::vector<nn::Mlp2<T>> experts_;
  nn::Mlp2<T> disc_;
  nn::Mlp2<T> head_;
};

}  // namespace midg::moie
