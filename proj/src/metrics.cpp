// SPDX-License-Identifier: Apache-2.0
#include "midg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "midg/errors.hpp"

namespace midg::pipeline {

MetricsReport compute_metrics(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.empty()) throw ContractError("metrics: empty split");
  if (truth.size() != predicted.size()) throw ContractError("metrics: truth and prediction lengths differ");
  MetricsReport r;
  r.n = truth.size();
  const double n = static_cast<double>(r.n);

  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  double abs_err = 0.0, mean_y = 0.0, mean_p = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const bool pos_true = truth[i] >= 0.0;
    const bool pos_pred = predicted[i] >= 0.0;
    correct += pos_true == pos_pred;
    tp += pos_true && pos_pred;
    fp += !pos_true && pos_pred;
    fn += pos_true && !pos_pred;
    abs_err += std::abs(truth[i] - predicted[i]);
    mean_y += truth[i];
    mean_p += predicted[i];
  }
  r.acc = static_cast<double>(correct) / n;
  const std::size_t denom = 2 * tp + fp + fn;
  r.f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  r.mae = abs_err / n;

  mean_y /= n;
  mean_p /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double dy = truth[i] - mean_y;
    const double dp = predicted[i] - mean_p;
    sxy += dy * dp;
    sxx += dy * dy;
    syy += dp * dp;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    r.corr = 0.0;
    r.corr_undefined = true;
  } else {
    r.corr = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }
  return r;
}

}  // namespace midg::pipeline
