// SPDX-License-Identifier: Apache-2.0
#include "midg/harness/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "midg/errors.hpp"
#include "midg/rng.hpp"

namespace midg::harness {

namespace {

struct ModalityModel {
  std::size_t dim = 0;
  std::vector<double> mixing;                    // dim x (1 + nuisance), row-major
  std::vector<std::vector<double>> shift;        // per domain, dim
  std::vector<std::vector<double>> noise_mixing; // per domain, dim x dim
};

ModalityModel build_modality(std::size_t dim, const SyntheticSpec& spec, Rng& rng) {
  ModalityModel m;
  m.dim = dim;
  const std::size_t cols = 1 + spec.nuisance_dims;
  m.mixing.resize(dim * cols);
  const double nuisance_gain = spec.nuisance_dims ? 1.0 / std::sqrt(static_cast<double>(spec.nuisance_dims)) : 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    m.mixing[r * cols] = rng.normal();
    for (std::size_t c = 1; c < cols; ++c) m.mixing[r * cols + c] = nuisance_gain * rng.normal();
  }
  const double mix_gain = spec.domain_shift_scale * 0.5 / std::sqrt(static_cast<double>(dim));
  for (std::size_t d = 0; d < spec.n_domains; ++d) {
    std::vector<double> shift(dim);
    for (double& s : shift) s = spec.domain_shift_scale * rng.normal();
    m.shift.push_back(std::move(shift));
    std::vector<double> mix(dim * dim);
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t c = 0; c < dim; ++c) mix[r * dim + c] = (r == c ? 1.0 : 0.0) + mix_gain * rng.normal();
    }
    m.noise_mixing.push_back(std::move(mix));
  }
  return m;
}

std::vector<double> draw_modality(const ModalityModel& m, std::size_t domain, const std::vector<double>& latent,
                                  double noise_std, Rng& rng) {
  const std::size_t cols = latent.size();
  std::vector<double> e(m.dim);
  for (double& x : e) x = noise_std * rng.normal();
  const auto& mix = m.noise_mixing[domain];
  std::vector<double> out(m.dim);
  for (std::size_t r = 0; r < m.dim; ++r) {
    double acc = m.shift[domain][r];
    for (std::size_t c = 0; c < cols; ++c) acc += m.mixing[r * cols + c] * latent[c];
    for (std::size_t c = 0; c < m.dim; ++c) acc += mix[r * m.dim + c] * e[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (dims.t == 0 || dims.a == 0 || dims.v == 0) throw ConfigError("synthetic: dims must be positive");
  if (n_domains == 0) throw ConfigError("synthetic: need at least one domain");
  if (!(label_lo < label_hi)) throw ConfigError("synthetic: label range needs lo < hi");
  if (!(domain_shift_scale >= 0.0)) throw ConfigError("synthetic: domain_shift_scale must be nonnegative");
  if (!(noise_std >= 0.0)) throw ConfigError("synthetic: noise_std must be nonnegative");
  if (test_domain >= static_cast<int>(n_domains)) throw ConfigError("synthetic: test_domain out of range");
  if (!(valid_fraction >= 0.0 && test_fraction >= 0.0 && valid_fraction + test_fraction < 1.0)) {
    throw ConfigError("synthetic: split fractions must be nonnegative and sum below 1");
  }
}

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng structure(splitmix64(spec.seed ^ 0x5eed5eed5eedULL));
  const std::array<ModalityModel, 3> models = {build_modality(spec.dims.t, spec, structure),
                                               build_modality(spec.dims.a, spec, structure),
                                               build_modality(spec.dims.v, spec, structure)};
  Dataset ds;
  ds.dims = spec.dims;
  ds.samples.resize(spec.n_samples);
  const double mid = 0.5 * (spec.label_lo + spec.label_hi);
  const double half = 0.5 * (spec.label_hi - spec.label_lo);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    // Independent per-sample stream: samples can be generated in any order.
    Rng rng(splitmix64(spec.seed + splitmix64(i + 1)));
    Sample& s = ds.samples[i];
    char id[32];
    std::snprintf(id, sizeof(id), "s%06zu", i);
    s.id = id;
    s.domain = static_cast<int>(rng.below(spec.n_domains));
    s.label = rng.uniform(spec.label_lo, spec.label_hi);
    std::vector<double> latent(1 + spec.nuisance_dims);
    latent[0] = (s.label - mid) / half;
    for (std::size_t k = 1; k < latent.size(); ++k) latent[k] = rng.normal();
    const auto domain = static_cast<std::size_t>(s.domain);
    s.t = draw_modality(models[0], domain, latent, spec.noise_std, rng);
    s.a = draw_modality(models[1], domain, latent, spec.noise_std, rng);
    s.v = draw_modality(models[2], domain, latent, spec.noise_std, rng);
    const double u = rng.uniform();
    if (spec.test_domain >= 0) {
      s.split = s.domain == spec.test_domain ? Split::Test : (u < spec.valid_fraction ? Split::Valid : Split::Train);
    } else {
      s.split = u < spec.test_fraction ? Split::Test
                : u < spec.test_fraction + spec.valid_fraction ? Split::Valid
                                                               : Split::Train;
    }
  }
  return ds;
}

}  // namespace midg::harness
