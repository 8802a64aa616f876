// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

#include "midg/autodiff/tensor.hpp"
#include "midg/rng.hpp"

namespace midg::test {

// Central differences of a plain scalar function.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double eps = 1e-5) {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double o = x[i];
    x[i] = o + eps;
    const double up = f(x);
    x[i] = o - eps;
    const double down = f(x);
    x[i] = o;
    d[i] = (up - down) / (2 * eps);
  }
  return d;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
  return worst;
}

inline std::vector<double> normals(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

template <class Range>
auto to_vec(const Range& s) {
  return std::vector<std::remove_cv_t<typename Range::element_type>>(s.begin(), s.end());
}

template <class T>
std::vector<T> values_of(const ad::Tensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

}  // namespace midg::test

#include "midg/nn.hpp"

namespace midg::test {

// Plain-loop reference for one row through Linear -> tanh -> Linear.
inline std::vector<double> mlp_ref(nn::Mlp2<double>& m, const std::vector<double>& x) {
  auto affine = [](nn::Linear<double>& l, const std::vector<double>& in) {
    const std::size_t n_in = l.in_features(), n_out = l.out_features();
    std::vector<double> out(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
      double s = l.bias().values()[j];
      for (std::size_t i = 0; i < n_in; ++i) s += in[i] * l.weight().values()[i * n_out + j];
      out[j] = s;
    }
    return out;
  };
  auto h = affine(m.first(), x);
  for (double& v : h) v = std::tanh(v);
  return affine(m.second(), h);
}

inline void zero(nn::Linear<double>& l) {
  l.weight().fill(0.0);
  l.bias().fill(0.0);
}

inline std::vector<double> row(const std::vector<double>& flat, std::size_t r, std::size_t width) {
  return {flat.begin() + r * width, flat.begin() + (r + 1) * width};
}

}  // namespace midg::test
