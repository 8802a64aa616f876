// SPDX-License-Identifier: Apache-2.0
//
// Cross-modal knowledge injection. For each target modality the other two
// modalities form a two-token key/value sequence attended by a single query token
// derived from the target. The attended content goes through dropout and an MLP,
// is scaled by a sigmoid gate driven by the target, and is added back onto the
// target. The three enhanced modalities are then fused and regressed to a score.

#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "midg/autodiff/tensor.hpp"
#include "midg/nn.hpp"
#include "midg/rng.hpp"

namespace midg::adapter {

using ad::Graph;
using ad::Tensor;

/// How the two source modalities become keys and values.
enum class KeyValueMode {
  /// Each source is one token, used for both its key and its value.
  Stacked,
  /// Keys are both projected from the first source and values from the second.
  Literal,
};

struct AdapterConfig {
  std::size_t d_code = 8;
  std::size_t heads = 4;
  double dropout = 0.1;
  std::size_t mlp_hidden = 16;
  std::size_t d_fuse = 16;
  std::size_t head_hidden = 16;
  bool share_source_projections = false;
  KeyValueMode mode = KeyValueMode::Stacked;

  std::size_t d_k() const { return d_code / heads; }
  void validate() const;
};

template <std::floating_point T>
struct Attention {
  /// Output after the final projection, (batch x d_code).
  Tensor<T> output;
  /// Concatenated head outputs before the final projection, (batch x d_code).
  Tensor<T> mixed;
  /// Per-head attention weights over the two source tokens, each (batch x 2).
  std::vector<Tensor<T>> weights;
  /// Projected value rows of the two tokens, each (batch x d_code).
  std::array<Tensor<T>, 2> values;
};

/// Residual fusion of the injected content into the target.
template <std::floating_point T>
Tensor<T> inject(const Tensor<T>& target, const Tensor<T>& injected);

/// (1/n) * ||y - y_hat||^2 for predictions of shape (n x 1). Throws ContractError if n == 0.
template <std::floating_point T>
Tensor<T> loss_out(std::span<const T> targets, const Tensor<T>& predictions);

/// Adapter for one target modality.
template <std::floating_point T>
class CrossModalAdapter {
 public:
  CrossModalAdapter() = default;
  CrossModalAdapter(const std::string& name, const AdapterConfig& config, Rng& rng);

  Attention<T> cross_attend(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& source1,
                            const Tensor<T>& source2);
  /// Dropout then MLP over the attention output.
  Tensor<T> candidate(Graph<T>& g, const Tensor<T>& attended, bool training, CounterRng* rng);
  /// sigmoid(W_g target + b_g), (batch x d_code).
  Tensor<T> gate_values(Graph<T>& g, const Tensor<T>& target);
  /// Gated candidate M_m.
  Tensor<T> gate(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& candidate);
  /// Full path: attend, candidate, gate, inject.
  Tensor<T> forward(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& source1, const Tensor<T>& source2,
                    bool training, CounterRng* rng);

  nn::Linear<T>& query() { return query_; }
  nn::Linear<T>& key(std::size_t token);
  nn::Linear<T>& value(std::size_t token);
  nn::Linear<T>& out_proj() { return out_proj_; }
  nn::Mlp2<T>& mlp() { return mlp_; }
  nn::Linear<T>& gate_layer() { return gate_; }

  void collect(nn::ParamList<T>& out);

 private:
  void check(const Tensor<T>& v, const char* what) const;

  AdapterConfig config_;
  nn::Linear<T> query_;
  std::array<nn::Linear<T>, 2> keys_;
  std::array<nn::Linear<T>, 2> values_;
  nn::Linear<T> out_proj_;
  nn::Mlp2<T> mlp_;
  nn::Linear<T> gate_;
};

/// Out-of-domain branch: three adapters (optional), fusion layer and regression head.
template <std::floating_point T>
class OutOfDomainBranch {
 public:
  OutOfDomainBranch() = default;
  OutOfDomainBranch(const std::string& name, const AdapterConfig& config, bool use_adapter, Rng& rng);

  bool uses_adapter() const { return adapters_.has_value(); }
  const AdapterConfig& config() const { return config_; }

  /// Enhanced modalities {O_ti, O_ai, O_vi}; the inputs themselves without adapters.
  std::array<Tensor<T>, 3> enhance(Graph<T>& g, const std::array<Tensor<T>, 3>& codes, bool training,
                                   CounterRng* rng);
  /// tanh(Linear(concat(o_t, o_a, o_v))), (batch x d_fuse).
  Tensor<T> fuse(Graph<T>& g, const std::array<Tensor<T>, 3>& enhanced);
  /// Out-of-domain score, (batch x 1).
  Tensor<T> predict_out(Graph<T>& g, const Tensor<T>& fused);
  Tensor<T> forward(Graph<T>& g, const std::array<Tensor<T>, 3>& codes, bool training, CounterRng* rng);

  CrossModalAdapter<T>& adapter(std::size_t modality);
  nn::Linear<T>& fuse_layer() { return fuse_; }
  nn::Mlp2<T>& head() { return head_; }

  void collect(nn::ParamList<T>& out);

 private:
  AdapterConfig config_;
  std::optional<std::array<CrossModalAdapter<T>, 3>> adapters_;
  nn::Linear<T> fuse_;
  nn::Mlp2<T> head_;
};

}  // namespace midg::adapter
