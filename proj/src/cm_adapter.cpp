// SPDX-License-Identifier: Apache-2.0
#include "midg/cm_adapter.hpp"

#include <cmath>

#include "midg/autodiff/ops.hpp"
#include "midg/errors.hpp"

namespace midg::adapter {

namespace {

constexpr const char* kModalityNames[3] = {"t", "a", "v"};

}  // namespace

void AdapterConfig::validate() const {
  if (d_code == 0 || heads == 0 || mlp_hidden == 0 || d_fuse == 0 || head_hidden == 0) {
    throw ConfigError("adapter: all dimensions must be positive");
  }
  if (d_code % heads != 0) {
    throw ConfigError("adapter: d_code " + std::to_string(d_code) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("adapter: dropout must lie in [0, 1)");
}

template <std::floating_point T>
Tensor<T> inject(const Tensor<T>& target, const Tensor<T>& injected) {
  if (target.shape() != injected.shape()) {
    throw ShapeError("inject: target " + ad::to_string(target.shape()) + " vs injected " +
                     ad::to_string(injected.shape()));
  }
  return target + injected;
}

template <std::floating_point T>
Tensor<T> loss_out(std::span<const T> targets, const Tensor<T>& predictions) {
  if (targets.empty()) throw ContractError("loss_out: empty batch");
  if (predictions.size() != targets.size()) {
    throw ShapeError("loss_out: " + std::to_string(targets.size()) + " targets vs predictions " +
                     ad::to_string(predictions.shape()));
  }
  const auto y = predictions.graph().input(predictions.shape(), std::vector<T>(targets.begin(), targets.end()));
  return ad::mean(ad::square(y - predictions));
}

template <std::floating_point T>
CrossModalAdapter<T>::CrossModalAdapter(const std::string& name, const AdapterConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_code;
  query_ = nn::Linear<T>(name + ".q", d, d, rng);
  const std::size_t distinct = config_.share_source_projections ? 1 : 2;
  for (std::size_t j = 0; j < distinct; ++j) {
    keys_[j] = nn::Linear<T>(name + ".k" + std::to_string(j), d, d, rng);
    values_[j] = nn::Linear<T>(name + ".v" + std::to_string(j), d, d, rng);
  }
  out_proj_ = nn::Linear<T>(name + ".o", d, d, rng);
  mlp_ = nn::Mlp2<T>(name + ".mlp", d, config_.mlp_hidden, d, nn::Activation::Tanh, rng);
  gate_ = nn::Linear<T>(name + ".gate", d, d, rng);
}

template <std::floating_point T>
nn::Linear<T>& CrossModalAdapter<T>::key(std::size_t token) {
  if (token > 1) throw ContractError("adapter: token index must be 0 or 1");
  return keys_[config_.share_source_projections ? 0 : token];
}

template <std::floating_point T>
nn::Linear<T>& CrossModalAdapter<T>::value(std::size_t token) {
  if (token > 1) throw ContractError("adapter: token index must be 0 or 1");
  return values_[config_.share_source_projections ? 0 : token];
}

template <std::floating_point T>
void CrossModalAdapter<T>::check(const Tensor<T>& v, const char* what) const {
  if (v.rank() != 2 || v.dim(1) != config_.d_code) {
    throw ShapeError(std::string("adapter: ") + what + " must be (batch x " + std::to_string(config_.d_code) +
                     "), got " + ad::to_string(v.shape()));
  }
}

template <std::floating_point T>
Attention<T> CrossModalAdapter<T>::cross_attend(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& source1,
                                                const Tensor<T>& source2) {
  check(target, "target");
  check(source1, "source1");
  check(source2, "source2");
  if (source1.dim(0) != target.dim(0) || source2.dim(0) != target.dim(0)) {
    throw ShapeError("adapter: target and sources disagree on batch size");
  }
  const bool literal = config_.mode == KeyValueMode::Literal;
  const std::array<const Tensor<T>*, 2> key_src = {&source1, literal ? &source1 : &source2};
  const std::array<const Tensor<T>*, 2> value_src = {literal ? &source2 : &source1, &source2};

  Attention<T> result;
  const auto q = query_(g, target);
  std::array<Tensor<T>, 2> k;
  for (std::size_t j = 0; j < 2; ++j) {
    k[j] = key(j)(g, *key_src[j]);
    result.values[j] = value(j)(g, *value_src[j]);
  }

  const std::size_t dk = config_.d_k();
  const T inv_sqrt_dk = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
  std::vector<Tensor<T>> head_out;
  head_out.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const std::size_t lo = h * dk, hi = lo + dk;
    const auto qh = ad::slice(q, 1, lo, hi);
    std::array<Tensor<T>, 2> scores;
    for (std::size_t j = 0; j < 2; ++j) {
      scores[j] = ad::scale(ad::sum(qh * ad::slice(k[j], 1, lo, hi), 1), inv_sqrt_dk);
    }
    const auto w = ad::softmax(ad::concat<T>(std::span<const Tensor<T>>(scores), 1), 1);
    result.weights.push_back(w);
    head_out.push_back(ad::slice(w, 1, 0, 1) * ad::slice(result.values[0], 1, lo, hi) +
                       ad::slice(w, 1, 1, 2) * ad::slice(result.values[1], 1, lo, hi));
  }
  result.mixed = ad::concat<T>(std::span<const Tensor<T>>(head_out), 1);
  result.output = out_proj_(g, result.mixed);
  return result;
}

template <std::floating_point T>
Tensor<T> CrossModalAdapter<T>::candidate(Graph<T>& g, const Tensor<T>& attended, bool training, CounterRng* rng) {
  if (training && config_.dropout > 0.0) {
    if (rng == nullptr) throw ContractError("adapter: training-mode dropout needs a generator");
    return mlp_(g, ad::dropout(attended, config_.dropout, true, *rng));
  }
  return mlp_(g, attended);
}

template <std::floating_point T>
Tensor<T> CrossModalAdapter<T>::gate_values(Graph<T>& g, const Tensor<T>& target) {
  check(target, "target");
  return ad::sigmoid(gate_(g, target));
}

template <std::floating_point T>
Tensor<T> CrossModalAdapter<T>::gate(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& candidate) {
  check(candidate, "candidate");
  return gate_values(g, target) * candidate;
}

template <std::floating_point T>
Tensor<T> CrossModalAdapter<T>::forward(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& source1,
                                        const Tensor<T>& source2, bool training, CounterRng* rng) {
  const auto attended = cross_attend(g, target, source1, source2);
  return inject(target, gate(g, target, candidate(g, attended.output, training, rng)));
}

template <std::floating_point T>
void CrossModalAdapter<T>::collect(nn::ParamList<T>& out) {
  query_.collect(out);
  const std::size_t distinct = config_.share_source_projections ? 1 : 2;
  for (std::size_t j = 0; j < distinct; ++j) {
    keys_[j].collect(out);
    values_[j].collect(out);
  }
  out_proj_.collect(out);
  mlp_.collect(out);
  gate_.collect(out);
}

template <std::floating_point T>
OutOfDomainBranch<T>::OutOfDomainBranch(const std::string& name, const AdapterConfig& config, bool use_adapter,
                                        Rng& rng)
    : config_(config) {
  config_.validate();
  if (use_adapter) {
    adapters_.emplace();
    for (std::size_t m = 0; m < 3; ++m) {
      (*adapters_)[m] = CrossModalAdapter<T>(name + ".adapter_" + kModalityNames[m], config_, rng);
    }
  }
  fuse_ = nn::Linear<T>(name + ".fuse", 3 * config_.d_code, config_.d_fuse, rng);
  head_ = nn::Mlp2<T>(name + ".head_out", config_.d_fuse, config_.head_hidden, 1, nn::Activation::Tanh, rng);
}

template <std::floating_point T>
CrossModalAdapter<T>& OutOfDomainBranch<T>::adapter(std::size_t modality) {
  if (!adapters_) throw ContractError("out-of-domain branch was built without adapters");
  return adapters_->at(modality);
}

template <std::floating_point T>
std::array<Tensor<T>, 3> OutOfDomainBranch<T>::enhance(Graph<T>& g, const std::array<Tensor<T>, 3>& codes,
                                                       bool training, CounterRng* rng) {
  if (!adapters_) return codes;
  std::array<Tensor<T>, 3> out;
  for (std::size_t m = 0; m < 3; ++m) {
    out[m] = (*adapters_)[m].forward(g, codes[m], codes[(m + 1) % 3], codes[(m + 2) % 3], training, rng);
  }
  return out;
}

template <std::floating_point T>
Tensor<T> OutOfDomainBranch<T>::fuse(Graph<T>& g, const std::array<Tensor<T>, 3>& enhanced) {
  return ad::tanh(fuse_(g, ad::concat({enhanced[0], enhanced[1], enhanced[2]}, 1)));
}

template <std::floating_point T>
Tensor<T> OutOfDomainBranch<T>::predict_out(Graph<T>& g, const Tensor<T>& fused) {
  return head_(g, fused);
}

template <std::floating_point T>
Tensor<T> OutOfDomainBranch<T>::forward(Graph<T>& g, const std::array<Tensor<T>, 3>& codes, bool training,
                                        CounterRng* rng) {
  return predict_out(g, fuse(g, enhance(g, codes, training, rng)));
}

template <std::floating_point T>
void OutOfDomainBranch<T>::collect(nn::ParamList<T>& out) {
  if (adapters_) {
    for (auto& a : *adapters_) a.collect(out);
  }
  fuse_.collect(out);
  head_.collect(out);
}

template Tensor<float> inject(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> inject(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> loss_out(std::span<const float>, const Tensor<float>&);
template Tensor<double> loss_out(std::span<const double>, const Tensor<double>&);
template class CrossModalAdapter<float>;
template class CrossModalAdapter<double>;
template class OutOfDomainBranch<float>;
template class OutOfDomainBranch<double>;

}  // namespace midg::adapter
