// SPDX-License-Identifier: Apache-2.0
#include "midg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "midg/autodiff/gradcheck.hpp"
#include "midg/autodiff/ops.hpp"
#include "midg/cm_adapter.hpp"
#include "midg/disentangle.hpp"
#include "midg/moie.hpp"

namespace midg {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using D = double;

namespace {

std::vector<double> normals(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Reduces a tensor to a scalar through fixed random weights so every output
// coordinate contributes a distinct amount to the gradient.
Tensor<D> project(const Tensor<D>& y, const std::vector<double>& weights) {
  auto& g = y.graph();
  return ad::sum(ad::mul(y, g.input(y.shape(), weights)));
}

struct Primitive {
  std::string name;
  Shape input_shape;
  Shape output_shape;
  std::function<Tensor<D>(const Tensor<D>&)> op;
  // Draws a point; primitives with kinks or restricted domains keep away from them.
  std::function<double(Rng&)> draw = [](Rng& r) { return r.normal(); };
  // Strength of a gradient reversal applied to the whole output, if any.
  std::optional<double> reversal = std::nullopt;
};

std::vector<Primitive> primitives() {
  auto halves = [](const Tensor<D>& x) {
    const std::size_t rows = x.dim(0) / 2;
    return std::pair{ad::slice(x, 0, 0, rows), ad::slice(x, 0, rows, 2 * rows)};
  };
  auto away_from = [](std::vector<double> points, double margin) {
    return [points, margin](Rng& r) {
      for (;;) {
        const double v = r.normal();
        if (std::all_of(points.begin(), points.end(), [&](double p) { return std::abs(v - p) > margin; })) return v;
      }
    };
  };
  std::vector<Primitive> out;
  out.push_back({"matmul", {6, 3}, {3, 3}, [=](const Tensor<D>& x) {
                   auto [a, b] = halves(x);
                   return ad::matmul(a, b);
                 }});
  out.push_back({"add", {6, 3}, {3, 3}, [=](const Tensor<D>& x) {
                   auto [a, b] = halves(x);
                   return a + b;
                 }});
  out.push_back({"sub", {6, 3}, {3, 3}, [=](const Tensor<D>& x) {
                   auto [a, b] = halves(x);
                   return a - b;
                 }});
  out.push_back({"mul", {6, 3}, {3, 3}, [=](const Tensor<D>& x) {
                   auto [a, b] = halves(x);
                   return a * b;
                 }});
  out.push_back({"mul_broadcast", {4, 3}, {3, 3}, [](const Tensor<D>& x) {
                   return ad::slice(x, 0, 0, 3) * ad::slice(x, 0, 3, 4);
                 }});
  out.push_back({"add_broadcast_col", {3, 4}, {3, 3}, [](const Tensor<D>& x) {
                   return ad::slice(x, 1, 0, 3) + ad::slice(x, 1, 3, 4);
                 }});
  out.push_back({"relu", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::relu(x); }, away_from({0.0}, 0.01)});
  out.push_back({"sigmoid", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::sigmoid(x); }});
  out.push_back({"tanh", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::tanh(x); }});
  out.push_back({"exp", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::exp(x); }});
  out.push_back({"log", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::log(x); },
                 [](Rng& r) { return r.uniform(0.2, 2.0); }});
  out.push_back({"square", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::square(x); }});
  out.push_back({"scale", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::scale(x, 1.7); }});
  out.push_back({"add_scalar", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::add_scalar(x, -0.3); }});
  out.push_back({"clamp", {3, 3}, {3, 3}, [](const Tensor<D>& x) { return ad::clamp(x, -0.5, 0.5); },
                 away_from({-0.5, 0.5}, 0.01)});
  out.push_back({"softmax_axis1", {3, 5}, {3, 5}, [](const Tensor<D>& x) { return ad::softmax(x, 1); }});
  out.push_back({"softmax_axis0", {3, 5}, {3, 5}, [](const Tensor<D>& x) { return ad::softmax(x, 0); }});
  out.push_back({"concat", {3, 5}, {3, 5}, [](const Tensor<D>& x) {
                   return ad::concat({ad::slice(x, 1, 2, 5), ad::slice(x, 1, 0, 2)}, 1);
                 }});
  out.push_back({"concat_axis0", {4, 3}, {4, 3}, [](const Tensor<D>& x) {
                   return ad::concat({ad::slice(x, 0, 3, 4), ad::slice(x, 0, 0, 3)}, 0);
                 }});
  out.push_back({"slice", {3, 5}, {3, 3}, [](const Tensor<D>& x) { return ad::slice(x, 1, 1, 4); }});
  out.push_back({"sum", {3, 4}, {1}, [](const Tensor<D>& x) { return ad::sum(x); }});
  out.push_back({"sum_axis0", {3, 4}, {1, 4}, [](const Tensor<D>& x) { return ad::sum(x, 0); }});
  out.push_back({"mean", {3, 4}, {1}, [](const Tensor<D>& x) { return ad::mean(x); }});
  out.push_back({"mean_axis1", {3, 4}, {3, 1}, [](const Tensor<D>& x) { return ad::mean(x, 1); }});
  out.push_back({"dropout", {3, 4}, {3, 4}, [](const Tensor<D>& x) {
                   CounterRng rng(99);
                   return ad::dropout(x, 0.3, true, rng);
                 }});
  out.push_back({"grad_reverse", {3, 4}, {3, 4}, [](const Tensor<D>& x) { return ad::grad_reverse(x, 1.5); },
                 [](Rng& r) { return r.normal(); }, 1.5});
  return out;
}

GradcheckCase check_primitive(const Primitive& p, const GradcheckSuiteOptions& opt, Rng& rng) {
  GradcheckCase c{p.name, opt.points_per_primitive, 0.0, false};
  for (std::size_t k = 0; k < opt.points_per_primitive; ++k) {
    std::vector<double> point(ad::numel(p.input_shape));
    for (double& v : point) v = p.draw(rng);
    const auto weights = normals(rng, ad::numel(p.output_shape));
    const ad::PointFunction f = [&](Graph<D>&, const Tensor<D>& x) { return project(p.op(x), weights); };
    const double err = p.reversal ? ad::gradcheck_reversed(f, f, *p.reversal, p.input_shape, point, opt.epsilon)
                                  : ad::gradcheck(f, p.input_shape, point, opt.epsilon);
    c.max_error = std::max(c.max_error, err);
  }
  c.passed = c.max_error < opt.tolerance;
  return c;
}

struct ModuleCheck {
  nn::ParamList<D> params;
  Shape shape;
  std::vector<double> point;
  ad::PointFunction f;
  // For modules whose output passes entirely through one gradient reversal.
  std::optional<double> reversal = std::nullopt;
  nn::ParamList<D> past_reversal;
};

// Checks gradients with respect to every parameter and to the module input.
template <class Build>
GradcheckCase check_module(const std::string& name, const GradcheckSuiteOptions& opt, Rng& rng, Build build) {
  GradcheckCase c{name, opt.points_per_module, 0.0, false};
  for (std::size_t k = 0; k < opt.points_per_module; ++k) {
    const std::uint64_t seed = rng.next();
    auto m = build(seed);
    const ad::ParamFunction pf = [&m](Graph<D>& g) { return m.f(g, g.input(m.shape, m.point)); };
    if (m.reversal) {
      c.max_error = std::max(c.max_error,
                             ad::gradcheck_reversed(m.f, m.f, *m.reversal, m.shape, m.point, opt.epsilon));
      c.max_error = std::max(c.max_error, ad::gradcheck_reversed(pf, pf, *m.reversal, m.params, m.past_reversal,
                                                                 opt.epsilon));
    } else {
      c.max_error = std::max(c.max_error, ad::gradcheck(m.f, m.shape, m.point, opt.epsilon));
      c.max_error = std::max(c.max_error, ad::gradcheck(pf, m.params, opt.epsilon));
    }
  }
  c.passed = c.max_error < opt.tolerance;
  return c;
}

}  // namespace

pipeline::ModelConfig toy_model_config() {
  pipeline::ModelConfig c;
  c.dims = {3, 3, 3};
  c.d_code = 4;
  c.encoder_hidden = 4;
  c.experts = 2;
  c.router_hidden = 4;
  c.expert_hidden = 4;
  c.d_repr = 4;
  c.disc_hidden = 4;
  c.head_hidden = 4;
  c.heads = 2;
  c.adapter_hidden = 4;
  c.d_fuse = 4;
  c.dropout = 0.1;
  return c;
}

std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckSuiteOptions& opt) {
  std::vector<GradcheckCase> results;
  Rng rng(opt.seed);
  for (const auto& p : primitives()) results.push_back(check_primitive(p, opt, rng));

  // Modules keep their state alive across the check via shared_ptr captured in f.
  const std::size_t batch = 2;

  results.push_back(check_module("disentangle.encode", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto dis = std::make_shared<disentangle::Disentangler<D>>("dis", disentangle::DisentangleConfig{3, 4, 5}, init);
    const auto w = normals(init, batch * 8);
    ModuleCheck m;
    dis->collect_encoder(disentangle::Branch::In, m.params);
    m.shape = {batch, 3};
    m.point = normals(init, batch * 3);
    m.f = [dis, w](Graph<D>&, const Tensor<D>& x) {
      const auto code = dis->encode(x.graph(), x, disentangle::Branch::In);
      return project(ad::concat({code.mean, code.logvar}, 1), w);
    };
    return m;
  }));

  results.push_back(check_module("disentangle.reconstruct", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto dis = std::make_shared<disentangle::Disentangler<D>>("dis", disentangle::DisentangleConfig{3, 4, 5}, init);
    const auto w = normals(init, batch * 3);
    ModuleCheck m;
    dis->decoder().collect(m.params);
    m.shape = {batch, 8};
    m.point = normals(init, batch * 8);
    m.f = [dis, w](Graph<D>& g, const Tensor<D>& x) {
      return project(dis->reconstruct(g, ad::slice(x, 1, 0, 4), ad::slice(x, 1, 4, 8)), w);
    };
    return m;
  }));

  results.push_back(check_module("disentangle.loss_dis", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto dis = std::make_shared<disentangle::Disentangler<D>>("dis", disentangle::DisentangleConfig{3, 4, 5}, init);
    ModuleCheck m;
    dis->collect(m.params);
    m.shape = {batch, 3};
    m.point = normals(init, batch * 3);
    m.f = [dis, seed](Graph<D>& g, const Tensor<D>& x) {
      CounterRng noise(seed);
      return dis->loss(g, x, dis->split(g, x, &noise));
    };
    return m;
  }));

  moie::MoIEConfig mc;
  mc.d_input = 6;
  mc.experts = 3;
  mc.router_hidden = 4;
  mc.expert_hidden = 5;
  mc.d_repr = 4;
  mc.disc_hidden = 4;
  mc.head_hidden = 4;
  mc.lambda = 0.7;

  results.push_back(check_module("moie.expert", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<moie::MixtureOfInvariantExperts<D>>("moie", mc, init);
    const auto w = normals(init, batch * mc.d_repr);
    ModuleCheck m;
    net->expert(1).collect(m.params);
    m.shape = {batch, mc.d_input};
    m.point = normals(init, batch * mc.d_input);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) { return project(net->expert_forward(g, x, 1), w); };
    return m;
  }));

  results.push_back(check_module("moie.forward", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<moie::MixtureOfInvariantExperts<D>>("moie", mc, init);
    const auto w = normals(init, batch * mc.d_repr);
    ModuleCheck m;
    net->collect_router_and_experts(m.params);
    m.shape = {batch, mc.d_input};
    m.point = normals(init, batch * mc.d_input);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) { return project(net->forward(g, x), w); };
    return m;
  }));

  results.push_back(check_module("moie.discriminate", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<moie::MixtureOfInvariantExperts<D>>("moie", mc, init);
    const auto w = normals(init, batch);
    ModuleCheck m;
    net->discriminator().collect(m.params);
    m.shape = {batch, mc.d_repr};
    m.point = normals(init, batch * mc.d_repr);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) { return project(net->discriminate(g, x), w); };
    return m;
  }));

  results.push_back(check_module("moie.loss_in", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<moie::MixtureOfInvariantExperts<D>>("moie", mc, init);
    ModuleCheck m;
    net->collect(m.params);
    net->discriminator().collect(m.past_reversal);
    m.reversal = mc.lambda;
    m.shape = {4, mc.d_input};
    m.point = normals(init, 4 * mc.d_input);
    m.f = [net](Graph<D>& g, const Tensor<D>& x) {
      const int domains[] = {0, 1, 0, 1};
      return net->loss_in(g, x, domains);
    };
    return m;
  }));

  results.push_back(check_module("moie.predict_in", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<moie::MixtureOfInvariantExperts<D>>("moie", mc, init);
    const auto w = normals(init, batch);
    ModuleCheck m;
    net->head().collect(m.params);
    m.shape = {batch, mc.d_repr};
    m.point = normals(init, batch * mc.d_repr);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) { return project(net->predict_in(g, x), w); };
    return m;
  }));

  adapter::AdapterConfig ac;
  ac.d_code = 4;
  ac.heads = 2;
  ac.dropout = 0.2;
  ac.mlp_hidden = 5;
  ac.d_fuse = 4;
  ac.head_hidden = 4;

  results.push_back(check_module("adapter.cross_attend", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<adapter::CrossModalAdapter<D>>("ad", ac, init);
    const auto w = normals(init, batch * ac.d_code);
    ModuleCheck m;
    net->collect(m.params);
    m.shape = {batch, 3 * ac.d_code};
    m.point = normals(init, batch * 3 * ac.d_code);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) {
      const auto a = net->cross_attend(g, ad::slice(x, 1, 0, 4), ad::slice(x, 1, 4, 8), ad::slice(x, 1, 8, 12));
      return project(a.output, w);
    };
    return m;
  }));

  results.push_back(check_module("adapter.fuse", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<adapter::OutOfDomainBranch<D>>("out", ac, true, init);
    const auto w = normals(init, batch * ac.d_fuse);
    ModuleCheck m;
    net->fuse_layer().collect(m.params);
    m.shape = {batch, 3 * ac.d_code};
    m.point = normals(init, batch * 3 * ac.d_code);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) {
      return project(net->fuse(g, {ad::slice(x, 1, 0, 4), ad::slice(x, 1, 4, 8), ad::slice(x, 1, 8, 12)}), w);
    };
    return m;
  }));

  results.push_back(check_module("adapter.predict_out", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<adapter::OutOfDomainBranch<D>>("out", ac, true, init);
    const auto w = normals(init, batch);
    ModuleCheck m;
    net->head().collect(m.params);
    m.shape = {batch, ac.d_fuse};
    m.point = normals(init, batch * ac.d_fuse);
    m.f = [net, w](Graph<D>& g, const Tensor<D>& x) { return project(net->predict_out(g, x), w); };
    return m;
  }));

  results.push_back(check_module("adapter.end_to_end", opt, rng, [&](std::uint64_t seed) {
    Rng init(seed);
    auto net = std::make_shared<adapter::OutOfDomainBranch<D>>("out", ac, true, init);
    const auto w = normals(init, batch);
    ModuleCheck m;
    net->collect(m.params);
    m.shape = {batch, 3 * ac.d_code};
    m.point = normals(init, batch * 3 * ac.d_code);
    m.f = [net, w, seed](Graph<D>& g, const Tensor<D>& x) {
      CounterRng drop(seed);
      return project(
          net->forward(g, {ad::slice(x, 1, 0, 4), ad::slice(x, 1, 4, 8), ad::slice(x, 1, 8, 12)}, true, &drop), w);
    };
    return m;
  }));

  // Whole training graph: total loss of one 2-sample minibatch.
  {
    GradcheckCase c{"pipeline.full_graph", opt.points_per_module, 0.0, false};
    const auto config = toy_model_config();
    pipeline::TrainConfig tc;
    tc.alpha = 0.5;
    tc.gamma = 0.1;
    for (std::size_t k = 0; k < opt.points_per_module; ++k) {
      const std::uint64_t seed = rng.next();
      pipeline::MidgModel<D> model(config, seed);
      Rng data(seed ^ 0xda7aULL);
      pipeline::Batch b;
      b.ids = {"a", "b"};
      b.labels = {data.uniform(-3, 3), data.uniform(-3, 3)};
      for (std::size_t m = 0; m < 3; ++m) b.features[m] = normals(data, batch * 3);
      auto params = model.parameters();
      nn::ParamList<D> past;
      model.moie().discriminator().collect(past);
      const ad::ParamFunction f = [&](Graph<D>& g) {
        CounterRng noise(seed);
        return pipeline::total_loss(model.forward_train(g, b, tc, noise).losses, tc);
      };
      const ad::ParamFunction adversarial = [&](Graph<D>& g) {
        CounterRng noise(seed);
        return ad::scale(model.forward_train(g, b, tc, noise).losses.l_in, tc.alpha);
      };
      c.max_error = std::max(c.max_error, ad::gradcheck_reversed(f, adversarial, config.lambda, params, past,
                                                                 opt.epsilon));
    }
    c.passed = c.max_error < opt.tolerance;
    results.push_back(c);
  }
  return results;
}

}  // namespace midg
