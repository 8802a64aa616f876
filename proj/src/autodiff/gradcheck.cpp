// SPDX-License-Identifier: Apache-2.0
#include "midg/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "midg/errors.hpp"

namespace midg::ad {

namespace {

double finite_or_throw(double v, const char* where) {
  if (!std::isfinite(v)) throw NumericError(std::string("gradcheck: non-finite value at ") + where);
  return v;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("gradcheck: epsilon must be positive");
}

std::vector<double> analytic_point(const PointFunction& f, const Shape& shape, const std::vector<double>& x) {
  Graph<double> g;
  const auto in = g.input(shape, x);
  const auto out = f(g, in);
  finite_or_throw(out.item(), "the base point");
  g.backward(out);
  return {in.grad().begin(), in.grad().end()};
}

std::vector<double> numeric_point(const PointFunction& f, const Shape& shape, std::vector<double> x,
                                  double epsilon) {
  auto eval = [&] {
    Graph<double> g;
    return finite_or_throw(f(g, g.input(shape, x)).item(), "a perturbed point");
  };
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + epsilon;
    const double up = eval();
    x[i] = orig - epsilon;
    const double down = eval();
    x[i] = orig;
    d[i] = (up - down) / (2.0 * epsilon);
  }
  return d;
}

// Analytic gradients concatenated over params in order.
std::vector<double> analytic_params(const ParamFunction& f, std::span<Parameter<double>* const> params) {
  for (auto* p : params) p->zero_grad();
  {
    Graph<double> g;
    const auto out = f(g);
    finite_or_throw(out.item(), "the base point");
    g.backward(out);
  }
  std::vector<double> a;
  for (auto* p : params) a.insert(a.end(), p->grad().begin(), p->grad().end());
  for (auto* p : params) p->zero_grad();
  return a;
}

std::vector<double> numeric_params(const ParamFunction& f, std::span<Parameter<double>* const> params,
                                   double epsilon) {
  auto eval = [&] {
    Graph<double> g;
    return finite_or_throw(f(g).item(), "a perturbed point");
  };
  std::vector<double> d;
  for (auto* p : params) {
    auto values = p->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + epsilon;
      const double up = eval();
      values[i] = orig - epsilon;
      const double down = eval();
      values[i] = orig;
      d.push_back((up - down) / (2.0 * epsilon));
    }
  }
  return d;
}

double worst_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  return worst;
}

}  // namespace

double gradcheck(const PointFunction& f, const Shape& shape, std::span<const double> point, double epsilon) {
  check_epsilon(epsilon);
  const std::vector<double> x(point.begin(), point.end());
  return worst_error(analytic_point(f, shape, x), numeric_point(f, shape, x, epsilon));
}

double gradcheck(const ParamFunction& f, std::span<Parameter<double>* const> params, double epsilon) {
  check_epsilon(epsilon);
  return worst_error(analytic_params(f, params), numeric_params(f, params, epsilon));
}

double gradcheck_reversed(const PointFunction& f, const PointFunction& reversed, double lambda, const Shape& shape,
                          std::span<const double> point, double epsilon) {
  check_epsilon(epsilon);
  const std::vector<double> x(point.begin(), point.end());
  auto reference = numeric_point(f, shape, x, epsilon);
  const auto through = numeric_point(reversed, shape, x, epsilon);
  for (std::size_t i = 0; i < reference.size(); ++i) reference[i] -= (1.0 + lambda) * through[i];
  return worst_error(analytic_point(f, shape, x), reference);
}

double gradcheck_reversed(const ParamFunction& f, const ParamFunction& reversed, double lambda,
                          std::span<Parameter<double>* const> params,
                          std::span<Parameter<double>* const> past_reversal, double epsilon) {
  check_epsilon(epsilon);
  auto reference = numeric_params(f, params, epsilon);
  const auto through = numeric_params(reversed, params, epsilon);
  std::size_t offset = 0;
  for (auto* p : params) {
    const bool past = std::find(past_reversal.begin(), past_reversal.end(), p) != past_reversal.end();
    if (!past) {
      for (std::size_t i = 0; i < p->size(); ++i) reference[offset + i] -= (1.0 + lambda) * through[offset + i];
    }
    offset += p->size();
  }
  return worst_error(analytic_params(f, params), reference);
}

}  // namespace midg::ad
