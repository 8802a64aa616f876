// SPDX-License-Identifier: Apache-2.0
//
// End-to-end model: per-modality decoupling feeds an in-domain branch (experts,
// adversarial discriminator, regression head) and an out-of-domain branch
// (cross-modal adapters, fusion, regression head). At test time only the
// out-of-domain branch runs, on posterior-mean out-of-domain codes.

#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "midg/autodiff/tensor.hpp"
#include "midg/cm_adapter.hpp"
#include "midg/disentangle.hpp"
#include "midg/harness/dataset.hpp"
#include "midg/metrics.hpp"
#include "midg/moie.hpp"
#include "midg/nn.hpp"

namespace midg::pipeline {

using ad::Graph;
using ad::Tensor;

struct ModelConfig {
  harness::Dims dims;
  std::size_t d_code = 8;
  std::size_t encoder_hidden = 16;
  std::size_t experts = 4;
  std::size_t router_hidden = 16;
  std::size_t expert_hidden = 32;
  std::size_t d_repr = 16;
  std::size_t disc_hidden = 16;
  std::size_t head_hidden = 16;
  double lambda = 1.0;
  std::size_t heads = 4;
  double dropout = 0.1;
  std::size_t adapter_hidden = 16;
  std::size_t d_fuse = 16;
  adapter::KeyValueMode kv_mode = adapter::KeyValueMode::Stacked;
  /// When false the experts/router/discriminator are replaced by one feedforward fusion net.
  bool use_moie = true;
  /// When false the out-of-domain codes are concatenated straight into the fusion layer.
  bool use_adapter = true;

  void validate() const;
  disentangle::DisentangleConfig disentangle_config(std::size_t d_input) const;
  moie::MoIEConfig moie_config() const;
  adapter::AdapterConfig adapter_config() const;
};

struct TrainConfig {
  double alpha = 0.1;  ///< weight on the domain-discrimination loss
  double beta = 1.0;   ///< weight on the out-of-domain regression loss
  double gamma = 0.01; ///< weight on the decoupling loss
  double delta = 1.0;  ///< weight on the regression loss of the combined prediction
  double w1 = 0.5;
  double w2 = 0.5;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double label_lo = -3.0;
  double label_hi = 3.0;
  /// Ramp the reversal strength with 2/(1+e^(-10p))-1 over training.
  bool grl_warmup = false;

  void validate() const;
};

enum class PredictMode { TrainFusion, Test };

struct Prediction {
  /// Absent in test mode: the in-domain branch is not evaluated.
  std::optional<double> y1;
  double y2 = 0.0;
  double combined = 0.0;
};

/// Loss components of one forward pass, each a scalar tensor.
template <std::floating_point T>
struct LossComponents {
  Tensor<T> l_dis;
  Tensor<T> l_in;
  Tensor<T> l_out;
  Tensor<T> l_reg;
};

template <std::floating_point T>
struct ForwardResult {
  Tensor<T> y1;        ///< (batch x 1)
  Tensor<T> y2;        ///< (batch x 1)
  Tensor<T> combined;  ///< (batch x 1)
  LossComponents<T> losses;
};

/// Row-major feature blocks for a minibatch.
struct Batch {
  std::vector<std::string> ids;
  std::vector<double> labels;
  std::array<std::vector<double>, 3> features;
  std::size_t size() const { return labels.size(); }
};

Batch make_batch(std::span<const harness::Sample* const> samples, const harness::Dims& dims);

/// alpha*l_in + beta*l_out + gamma*l_dis + delta*l_reg.
template <std::floating_point T>
Tensor<T> total_loss(const LossComponents<T>& losses, const TrainConfig& config);

/// Scalar form of total_loss for logged component values.
double total_loss(double l_dis, double l_in, double l_out, double l_reg, const TrainConfig& config);

template <std::floating_point T>
class MidgModel {
 public:
  MidgModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Training forward pass. `rng` supplies reparameterization noise and dropout masks.
  /// Throws DataError naming the sample if a label lies outside the configured range.
  ForwardResult<T> forward_train(Graph<T>& g, const Batch& batch, const TrainConfig& config, CounterRng& rng);

  /// Deterministic inference: posterior means, dropout off.
  std::vector<Prediction> predict(const Batch& batch, PredictMode mode, double w1 = 0.5, double w2 = 0.5);
  Prediction predict(const harness::Sample& sample, PredictMode mode, double w1 = 0.5, double w2 = 0.5);

  disentangle::Disentangler<T>& disentangler(std::size_t modality) { return dis_.at(modality); }
  moie::MixtureOfInvariantExperts<T>& moie();
  adapter::OutOfDomainBranch<T>& out_branch() { return out_; }

  nn::ParamList<T> parameters();
  /// In-encoders, experts/router/discriminator (or plain fusion net) and the in-domain head.
  nn::ParamList<T> in_branch_parameters();
  /// Out-encoders, adapters, fusion layer and out-of-domain head.
  nn::ParamList<T> out_branch_parameters();
  nn::ParamList<T> decoder_parameters();

 private:
  std::array<Tensor<T>, 3> inputs(Graph<T>& g, const Batch& batch) const;
  Tensor<T> in_representation(Graph<T>& g, const Tensor<T>& fused);
  Tensor<T> in_head(Graph<T>& g, const Tensor<T>& repr);

  ModelConfig config_;
  std::array<disentangle::Disentangler<T>, 3> dis_;
  std::optional<moie::MixtureOfInvariantExperts<T>> moie_;
  nn::Mlp2<T> plain_fusion_;
  nn::Mlp2<T> plain_head_;
  adapter::OutOfDomainBranch<T> out_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double l_dis = 0.0;
  double l_in = 0.0;
  double l_out = 0.0;
  double l_reg = 0.0;
  double total = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch adaptive-moment training on the train split. Deterministic for a fixed seed.
/// Throws NumericError naming the component if any loss goes non-finite.
template <std::floating_point T>
std::vector<EpochRecord> fit(MidgModel<T>& model, const harness::Dataset& dataset, const TrainConfig& config,
                             const EpochCallback& on_epoch = {});

struct TrainResult {
  MidgModel<float> model;
  std::vector<EpochRecord> log;
};

/// Builds a fresh single-precision model seeded from config.seed and fits it.
TrainResult train(const harness::Dataset& dataset, const ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

template <std::floating_point T>
MetricsReport evaluate(MidgModel<T>& model, std::span<const harness::Sample* const> samples, PredictMode mode,
                       double w1 = 0.5, double w2 = 0.5);

struct AblationRow {
  bool moie = false;
  bool adapter = false;
  MetricsReport metrics;
  std::size_t parameter_count = 0;
};

/// Trains and evaluates (test split, test protocol) the four on/off combinations in the
/// order (off,off), (on,off), (off,on), (on,on). Disabling the experts forces alpha = 0.
std::vector<AblationRow> ablate(const harness::Dataset& dataset, const ModelConfig& model_config,
                                const TrainConfig& config);

}  // namespace midg::pipeline
