// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "midg/autodiff/tensor.hpp"

namespace midg::ad {

/// Scalar-valued function of one input tensor, built into a fresh graph on each call.
using PointFunction = std::function<Tensor<double>(Graph<double>&, const Tensor<double>&)>;
/// Scalar-valued function of bound parameters.
using ParamFunction = std::function<Tensor<double>(Graph<double>&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Throws NumericError if the function is non-finite at any evaluated point.
double gradcheck(const PointFunction& f, const Shape& shape, std::span<const double> point,
                 double epsilon = 1e-4);

/// Same metric over every coordinate of every parameter in `params`.
double gradcheck(const ParamFunction& f, std::span<Parameter<double>* const> params,
                 double epsilon = 1e-4);

/// Variants for functions containing one gradient-reversal op of strength `lambda`.
/// `reversed` is the part of `f` that depends on the checked coordinates through the
/// reversal; its derivative enters the reference with sign -lambda instead of +1.
/// Parameters in `past_reversal` sit between the reversal and the loss and are
/// compared against the plain central difference.
double gradcheck_reversed(const PointFunction& f, const PointFunction& reversed, double lambda, const Shape& shape,
                          std::span<const double> point, double epsilon = 1e-4);

double gradcheck_reversed(const ParamFunction& f, const ParamFunction& reversed, double lambda,
                          std::span<Parameter<double>* const> params,
                          std::span<Parameter<double>* const> past_reversal, double epsilon = 1e-4);

}  // namespace midg::ad
