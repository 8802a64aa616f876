// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

namespace midg::pipeline {

struct MetricsReport {
  /// Binary accuracy after mapping scores >= 0 to the positive class.
  double acc = 0.0;
  /// F1 of the positive class. 1 when there are no positives and none are predicted.
  double f1 = 0.0;
  double mae = 0.0;
  /// Pearson correlation; 0 when either side has zero variance.
  double corr = 0.0;
  std::size_t n = 0;
  /// Set when Pearson correlation was undefined and reported as 0.
  bool corr_undefined = false;
};

/// Throws ContractError on empty or mismatched inputs.
MetricsReport compute_metrics(std::span<const double> truth, std::span<const double> predicted);

}  // namespace midg::pipeline
