// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multimodal sentiment data with per-domain covariate shift.
//
// For each sample a label y ~ U[lo, hi] and nuisance z ~ N(0, I) are drawn. Each
// modality vector is
//
//   x_m = W_m [y_n; z] + shift_{d,m} + R_{d,m} (noise_std * e),   e ~ N(0, I)
//
// where y_n is y rescaled to [-1, 1], W_m is a fixed per-seed map, and the domain
// offset shift_{d,m} and noise mixing R_{d,m} = I + shift_scale * G_{d,m} vanish at
// shift_scale = 0.

#pragma once

#include <cstddef>
#include <cstdint>

#include "midg/harness/dataset.hpp"

namespace midg::harness {

struct SyntheticSpec {
  std::size_t n_samples = 1000;
  Dims dims;
  std::size_t n_domains = 3;
  double domain_shift_scale = 1.0;
  double label_lo = -3.0;
  double label_hi = 3.0;
  double noise_std = 0.5;
  std::size_t nuisance_dims = 4;
  std::uint64_t seed = 0;
  /// Domain whose samples all go to the test split; negative for a random split.
  int test_domain = -1;
  double valid_fraction = 0.1;
  /// Used only for random splits.
  double test_fraction = 0.2;

  void validate() const;
};

Dataset generate(const SyntheticSpec& spec);

}  // namespace midg::harness
