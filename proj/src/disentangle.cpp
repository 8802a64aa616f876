// SPDX-License-Identifier: Apache-2.0
#include "midg/disentangle.hpp"

#include <cmath>
#include <numbers>

#include "midg/autodiff/ops.hpp"
#include "midg/errors.hpp"

namespace midg::disentangle {

void DisentangleConfig::validate() const {
  if (d_input == 0 || d_code == 0 || hidden == 0) {
    throw ConfigError("disentangle: all dimensions must be positive");
  }
}

template <std::floating_point T>
Tensor<T> sample(const GaussianCode<T>& code, const Tensor<T>& noise) {
  if (noise.shape() != code.mean.shape()) {
    throw ShapeError("sample: noise shape " + ad::to_string(noise.shape()) + " differs from code shape " +
                     ad::to_string(code.mean.shape()));
  }
  return code.mean + ad::exp(ad::scale(code.logvar, T(0.5))) * noise;
}

template <std::floating_point T>
Tensor<T> kl_to_prior(const GaussianCode<T>& code) {
  // 0.5 * sum_j (mu^2 + e^lv - 1 - lv)
  auto terms = ad::square(code.mean) + ad::exp(code.logvar) - code.logvar;
  return ad::scale(ad::add_scalar(ad::sum(terms, 1), -static_cast<T>(code.mean.dim(1))), T(0.5));
}

template <std::floating_point T>
Disentangler<T>::Disentangler(const std::string& name, const DisentangleConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const auto [d_in, d_code, hidden] = config_;
  enc_in_ = nn::Mlp2<T>(name + ".enc_in", d_in, hidden, 2 * d_code, nn::Activation::Tanh, rng);
  enc_out_ = nn::Mlp2<T>(name + ".enc_out", d_in, hidden, 2 * d_code, nn::Activation::Tanh, rng);
  decoder_ = nn::Mlp2<T>(name + ".dec", 2 * d_code, hidden, d_in, nn::Activation::Tanh, rng);
}

template <std::floating_point T>
GaussianCode<T> Disentangler<T>::encode(Graph<T>& g, const Tensor<T>& features, Branch branch) {
  if (features.rank() != 2 || features.dim(1) != config_.d_input) {
    throw ShapeError("encode: expected features (batch x " + std::to_string(config_.d_input) + "), got " +
                     ad::to_string(features.shape()));
  }
  const auto raw = encoder(branch)(g, features);
  const std::size_t d = config_.d_code;
  return {ad::slice(raw, 1, 0, d),
          ad::clamp(ad::slice(raw, 1, d, 2 * d), static_cast<T>(kLogvarMin), static_cast<T>(kLogvarMax))};
}

template <std::floating_point T>
DisentangledPair<T> Disentangler<T>::split(Graph<T>& g, const Tensor<T>& features, CounterRng* noise) {
  DisentangledPair<T> pair;
  pair.in_code = encode(g, features, Branch::In);
  pair.out_code = encode(g, features, Branch::Out);
  if (noise == nullptr) {
    pair.in_sample = pair.in_code.mean;
    pair.out_sample = pair.out_code.mean;
    return pair;
  }
  auto draw = [&](const GaussianCode<T>& code) {
    const std::uint64_t stream = noise->claim_stream();
    std::vector<T> eps(code.mean.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = static_cast<T>(noise->normal(stream, i));
    return sample(code, g.input(code.mean.shape(), std::move(eps)));
  };
  pair.in_sample = draw(pair.in_code);
  pair.out_sample = draw(pair.out_code);
  return pair;
}

template <std::floating_point T>
Tensor<T> Disentangler<T>::reconstruct(Graph<T>& g, const Tensor<T>& in_sample, const Tensor<T>& out_sample) {
  for (const auto* s : {&in_sample, &out_sample}) {
    if (s->rank() != 2 || s->dim(1) != config_.d_code) {
      throw ShapeError("reconstruct: expected samples (batch x " + std::to_string(config_.d_code) + "), got " +
                       ad::to_string(s->shape()));
    }
  }
  return decoder_(g, ad::concat({in_sample, out_sample}, 1));
}

template <std::floating_point T>
Tensor<T> Disentangler<T>::loss(Graph<T>& g, const Tensor<T>& features, const DisentangledPair<T>& pair) {
  const auto recon = reconstruct(g, pair.in_sample, pair.out_sample);
  // -log N(a; recon, I) = 0.5 * ||a - recon||^2 + (d/2) ln(2 pi)
  const T normalizer = static_cast<T>(0.5 * static_cast<double>(config_.d_input) * std::log(2.0 * std::numbers::pi));
  const auto nll = ad::add_scalar(ad::scale(ad::sum(ad::square(features - recon), 1), T(0.5)), normalizer);
  return ad::mean(kl_to_prior(pair.in_code) + kl_to_prior(pair.out_code) + nll);
}

template <std::floating_point T>
void Disentangler<T>::collect(nn::ParamList<T>& out) {
  enc_in_.collect(out);
  enc_out_.collect(out);
  decoder_.collect(out);
}

template Tensor<float> sample(const GaussianCode<float>&, const Tensor<float>&);
template Tensor<double> sample(const GaussianCode<double>&, const Tensor<double>&);
template Tensor<float> kl_to_prior(const GaussianCode<float>&);
template Tensor<double> kl_to_prior(const GaussianCode<double>&);
template class Disentangler<float>;
template class Disentangler<double>;

}  // namespace midg::disentangle
