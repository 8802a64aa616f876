// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks over every differentiable primitive, every module, and the
// full training graph on a toy configuration. Everything runs in 64-bit.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "midg/pipeline.hpp"

namespace midg {

struct GradcheckSuiteOptions {
  std::size_t points_per_primitive = 100;
  std::size_t points_per_module = 3;
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  std::uint64_t seed = 2024;
};

struct GradcheckCase {
  std::string name;
  std::size_t points = 0;
  double max_error = 0.0;
  bool passed = false;
};

/// Toy configuration for whole-graph checks: 4-wide codes, 2 experts, 2 heads.
pipeline::ModelConfig toy_model_config();

std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

}  // namespace midg
