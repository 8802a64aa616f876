// SPDX-License-Identifier: Apache-2.0
//
// Entropy-based decoupling of one modality's features into an in-domain code and an
// out-of-domain code. Each code is a diagonal Gaussian posterior produced by its own
// encoder; training minimizes a variational upper bound on the mutual information
// between the two codes:
//
//   KL(q_in || N(0,I)) + KL(q_out || N(0,I)) - log p(a | z_in, z_out)
//
// with a unit-variance Gaussian decoder and a single reparameterized sample.

#pragma once

#include <concepts>
#include <cstddef>
#include <string>

#include "midg/autodiff/tensor.hpp"
#include "midg/nn.hpp"
#include "midg/rng.hpp"

namespace midg::disentangle {

using ad::Graph;
using ad::Tensor;

inline constexpr double kLogvarMin = -8.0;
inline constexpr double kLogvarMax = 8.0;

struct DisentangleConfig {
  std::size_t d_input = 8;
  std::size_t d_code = 8;
  std::size_t hidden = 16;

  void validate() const;
};

enum class Branch { In, Out };

/// Posterior parameters for a batch: mean and clamped log-variance, both (batch x d_code).
template <std::floating_point T>
struct GaussianCode {
  Tensor<T> mean;
  Tensor<T> logvar;
};

template <std::floating_point T>
struct DisentangledPair {
  GaussianCode<T> in_code;
  GaussianCode<T> out_code;
  Tensor<T> in_sample;
  Tensor<T> out_sample;
};

/// mean + exp(logvar / 2) * noise.
template <std::floating_point T>
Tensor<T> sample(const GaussianCode<T>& code, const Tensor<T>& noise);

/// Closed-form KL(N(mean, exp(logvar)) || N(0, I)) per row, shape (batch x 1).
template <std::floating_point T>
Tensor<T> kl_to_prior(const GaussianCode<T>& code);

template <std::floating_point T>
class Disentangler {
 public:
  Disentangler() = default;
  Disentangler(const std::string& name, const DisentangleConfig& config, Rng& rng);

  const DisentangleConfig& config() const { return config_; }

  GaussianCode<T> encode(Graph<T>& g, const Tensor<T>& features, Branch branch);

  /// Encodes both branches. With `noise` the samples are reparameterized draws from a
  /// fresh stream; without it they are the posterior means.
  DisentangledPair<T> split(Graph<T>& g, const Tensor<T>& features, CounterRng* noise);

  /// Decoder mean over the concatenated samples, shape (batch x d_input).
  Tensor<T> reconstruct(Graph<T>& g, const Tensor<T>& in_sample, const Tensor<T>& out_sample);

  /// Batch-mean decoupling loss; `pair` must come from `features` in the same graph.
  Tensor<T> loss(Graph<T>& g, const Tensor<T>& features, const DisentangledPair<T>& pair);

  nn::Mlp2<T>& encoder(Branch branch) { return branch == Branch::In ? enc_in_ : enc_out_; }
  nn::Mlp2<T>& decoder() { return decoder_; }

  void collect(nn::ParamList<T>& out);
  void collect_encoder(Branch branch, nn::ParamList<T>& out) { encoder(branch).collect(out); }

 private:
  DisentangleConfig config_;
  nn::Mlp2<T> enc_in_;
  nn::Mlp2<T> enc_out_;
  nn::Mlp2<T> decoder_;
};

}  // namespace midg::disentangle
