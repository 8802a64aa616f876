// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "midg/autodiff/ops.hpp"
#include "midg/cli.hpp"
#include "midg/cm_adapter.hpp"
#include "midg/disentangle.hpp"
#include "midg/errors.hpp"
#include "midg/gradcheck_suite.hpp"
#include "midg/harness/dataset.hpp"
#include "midg/harness/synthetic.hpp"
#include "midg/moie.hpp"
#include "midg/pipeline.hpp"

using namespace midg;
using ad::Graph;
using ad::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::vector<double> normals(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------------------------
// 1. Gradient oracle

void gradient_oracle(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckSuiteOptions opt;
  opt.points_per_primitive = 100;
  opt.epsilon = 1e-4;
  opt.tolerance = 1e-4;
  const auto toy = toy_model_config();
  o.require(toy.d_code == 4 && toy.experts == 2 && toy.heads == 2, "toy configuration");
  const auto cases = run_gradcheck_suite(opt);
  double worst = 0.0;
  std::size_t primitives = 0;
  bool full_graph = false;
  for (const auto& c : cases) {
    worst = std::max(worst, c.max_error);
    if (c.name.find('.') == std::string::npos) {
      ++primitives;
      o.require(c.points == 100, c.name + " point count");
    }
    if (c.name == "pipeline.full_graph") full_graph = true;
    o.require(c.passed && c.max_error < 1e-4, c.name);
  }
  o.require(full_graph, "full graph case present");
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 120.0, "runtime under 2 minutes");
  o.detail << cases.size() << " cases (" << primitives << " primitives x 100 points), max rel err " << worst;
}

// ---------------------------------------------------------------------------------------------
// 2. Closed-form oracles

void closed_forms(Outcome& o) {
  {
    Graph<double> g;
    const int d[] = {1, 0, 1, 0};
    const std::vector<double> p{0.8, 0.3, 0.55, 0.05};
    double hand = 0;
    for (std::size_t i = 0; i < 4; ++i) hand += d[i] ? -std::log(p[i]) : -std::log(1 - p[i]);
    hand /= 4;
    const double bce = moie::binary_cross_entropy(g.input({4, 1}, p), d).item();
    o.require(std::abs(bce - hand) <= 1e-10, "BCE");
    o.detail << "BCE err " << std::abs(bce - hand) << "; ";
  }
  {
    Graph<double> g;
    const std::vector<double> y{0.0, 2.0};
    const double mse = adapter::loss_out<double>(y, g.input({2, 1}, {1.0, 1.0})).item();
    o.require(mse == 1.0, "MSE exact");
    o.detail << "MSE " << mse << "; ";
  }
  {
    Graph<double> g;
    const disentangle::GaussianCode<double> c{g.input({1, 1}, {1.0}), g.input({1, 1}, {0.0})};
    const double kl = disentangle::kl_to_prior(c).item();
    o.require(std::abs(kl - 0.5) <= 1e-12, "KL");
    o.detail << "KL err " << std::abs(kl - 0.5) << "; ";
  }
  {
    Graph<double> g;
    const auto s = ad::softmax(g.input({1, 2}, {0.0, std::numbers::ln2}), 1);
    const double err = std::max(std::abs(s.values()[0] - 1.0 / 3), std::abs(s.values()[1] - 2.0 / 3));
    o.require(err <= 1e-12, "softmax");
    o.detail << "softmax err " << err;
  }
}

// ---------------------------------------------------------------------------------------------
// 3. Structural invariants

void structural(Outcome& o) {
  constexpr int kCases = 1000;
  Rng rng(303);
  moie::MoIEConfig mc;
  mc.d_input = 6;
  mc.experts = 4;
  mc.router_hidden = 5;
  mc.expert_hidden = 5;
  mc.d_repr = 3;
  mc.disc_hidden = 4;
  mc.head_hidden = 4;

  int router_ok = 0, attention_ok = 0, gate_ok = 0, grl_ok = 0, sign_ok = 0;
  for (int i = 0; i < kCases; ++i) {
    Rng init(rng.next());
    moie::MixtureOfInvariantExperts<double> net("m", mc, init);
    Graph<double> g;
    const auto w = net.route(g, g.input({1, 6}, normals(init, 6, 4.0)));
    double s = 0;
    bool nonneg = true;
    for (double v : w.values()) s += v, nonneg = nonneg && v >= 0;
    router_ok += nonneg && std::abs(s - 1) <= 1e-6;
  }
  for (int i = 0; i < kCases; ++i) {
    Rng init(rng.next());
    adapter::AdapterConfig ac;
    ac.d_code = 6;
    ac.heads = 3;
    ac.mode = i % 2 ? adapter::KeyValueMode::Literal : adapter::KeyValueMode::Stacked;
    adapter::CrossModalAdapter<double> ad("a", ac, init);
    Graph<double> g;
    const auto t = g.input({1, 6}, normals(init, 6, 3.0));
    const auto att = ad.cross_attend(g, t, g.input({1, 6}, normals(init, 6, 3.0)), g.input({1, 6}, normals(init, 6, 3.0)));
    bool ok = true;
    for (const auto& hw : att.weights) {
      const double a = hw.values()[0], b = hw.values()[1];
      ok = ok && a >= 0 && b >= 0 && std::abs(a + b - 1) <= 1e-6;
    }
    for (std::size_t j = 0; j < 6; ++j) {
      const double a = att.values[0].values()[j], b = att.values[1].values()[j], m = att.mixed.values()[j];
      ok = ok && m >= std::min(a, b) - 1e-12 && m <= std::max(a, b) + 1e-12;
    }
    attention_ok += ok;
    bool gate = true;
    for (double v : ad.gate_values(g, t).values()) gate = gate && v > 0 && v < 1;
    gate_ok += gate;
  }
  for (int i = 0; i < kCases; ++i) {
    const auto x = normals(rng, 5, 50.0);
    const auto up = normals(rng, 5);
    const double lambda = rng.uniform(0.0, 4.0);
    Graph<double> g1, g2;
    auto a = g1.input({5}, x);
    auto ya = ad::grad_reverse(a, lambda);
    g1.backward(ad::sum(ad::sigmoid(ya) * g1.input({5}, up)));
    auto b = g2.input({5}, x);
    g2.backward(ad::sum(ad::sigmoid(b) * g2.input({5}, up)));
    bool ok = true;
    for (std::size_t j = 0; j < 5; ++j) {
      ok = ok && ya.values()[j] == x[j] && a.grad()[j] == -lambda * b.grad()[j];
    }
    grl_ok += ok;
  }
  for (int i = 0; i < kCases; ++i) {
    Rng init(rng.next());
    auto cfg = mc;
    cfg.experts = 2;
    cfg.lambda = init.uniform(0.1, 3.0);
    moie::MixtureOfInvariantExperts<double> net("m", cfg, init);
    nn::ParamList<double> experts;
    net.collect_router_and_experts(experts);
    const auto x = normals(init, 24);
    const int d[] = {0, 1, 1, 0};
    auto grads = [&](bool reversed) {
      for (auto* p : experts) p->zero_grad();
      Graph<double> g;
      auto in = g.input({4, 6}, x);
      g.backward(reversed ? net.loss_in(g, in, d)
                          : moie::binary_cross_entropy(net.discriminate(g, net.forward(g, in)), d));
      std::vector<double> out;
      for (auto* p : experts) out.insert(out.end(), p->grad().begin(), p->grad().end());
      return out;
    };
    const auto r = grads(true), id = grads(false);
    bool ok = true;
    for (std::size_t j = 0; j < r.size(); ++j) {
      ok = ok && std::abs(r[j] + cfg.lambda * id[j]) <= 1e-12 * std::max(1.0, std::abs(r[j]));
    }
    sign_ok += ok;
  }
  o.require(router_ok == kCases, "router simplex");
  o.require(attention_ok == kCases, "attention simplex and hull");
  o.require(gate_ok == kCases, "gate range");
  o.require(grl_ok == kCases, "reversal identity");
  o.require(sign_ok == kCases, "loss_in sign");
  o.detail << "router " << router_ok << ", attention " << attention_ok << ", gate " << gate_ok << ", reversal "
           << grl_ok << ", loss_in sign " << sign_ok << " of " << kCases;
}

// ---------------------------------------------------------------------------------------------
// 4. Test protocol isolation

void protocol_isolation(Outcome& o) {
  harness::SyntheticSpec spec;
  spec.n_samples = 400;
  spec.test_domain = 2;
  spec.seed = 404;
  const auto ds = harness::generate(spec);
  pipeline::ModelConfig mc;
  mc.dims = ds.dims;
  pipeline::TrainConfig tc;
  tc.epochs = 2;
  auto trained = pipeline::train(ds, mc, tc);
  auto& model = trained.model;
  auto test = ds.select(harness::Split::Test);
  test.resize(std::min<std::size_t>(test.size(), 100));
  o.require(test.size() == 100, "100 test samples");
  const auto batch = pipeline::make_batch(test, ds.dims);
  const auto before = model.predict(batch, pipeline::PredictMode::Test);
  Rng rng(405);
  std::size_t perturbed = 0;
  for (auto* p : model.in_branch_parameters()) {
    for (float& v : p->values()) v += static_cast<float>(rng.normal());
    perturbed += p->size();
  }
  const auto after = model.predict(batch, pipeline::PredictMode::Test);
  std::size_t identical = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    identical += std::memcmp(&before[i].combined, &after[i].combined, sizeof(double)) == 0;
  }
  o.require(identical == before.size(), "bit-identical predictions");
  o.detail << identical << "/" << before.size() << " predictions bit-identical after perturbing " << perturbed
           << " in-branch weights";
}

// ---------------------------------------------------------------------------------------------
// 5. Adversarial invariance emergence

std::vector<double> fused_row(const harness::Sample& s) {
  std::vector<double> x(s.t);
  x.insert(x.end(), s.a.begin(), s.a.end());
  x.insert(x.end(), s.v.begin(), s.v.end());
  return x;
}

// Fresh two-layer probe trained on the first half of the rows, scored on the second half.
double probe_accuracy(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                      std::uint64_t seed) {
  const std::size_t n = rows.size(), d = rows.front().size(), half = n / 2;
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows[i][j] / half;
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (rows[i][j] - mean[j]) * (rows[i][j] - mean[j]) / half;
  for (double& s : sd) s = std::sqrt(s) + 1e-8;
  auto standardized = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> out;
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = 0; j < d; ++j) out.push_back((rows[i][j] - mean[j]) / sd[j]);
    return out;
  };
  const auto train_x = standardized(0, half);
  const auto test_x = standardized(half, n);
  Rng init(seed);
  nn::Mlp2<double> probe("probe", d, 32, 1, nn::Activation::Tanh, init);
  nn::ParamList<double> params;
  probe.collect(params);
  nn::Adam<double> opt({0.01});
  const std::span<const int> train_labels(labels.data(), half);
  for (int epoch = 0; epoch < 300; ++epoch) {
    nn::zero_grad<double>(params);
    Graph<double> g;
    g.backward(moie::binary_cross_entropy(ad::sigmoid(probe(g, g.input({half, d}, train_x))), train_labels));
    opt.step(params);
  }
  Graph<double> g;
  const auto p = ad::sigmoid(probe(g, g.input({n - half, d}, test_x)));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n - half; ++i) correct += (p.values()[i] >= 0.5) == (labels[half + i] == 1);
  return static_cast<double>(correct) / static_cast<double>(n - half);
}

void invariance_emergence(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    harness::SyntheticSpec spec;
    spec.n_samples = 2000;
    spec.n_domains = 2;
    spec.domain_shift_scale = 1.0;
    spec.seed = 500 + seed;
    const auto ds = harness::generate(spec);
    std::vector<std::vector<double>> raw;
    std::vector<int> domains;
    std::vector<double> labels;
    for (const auto& s : ds.samples) {
      raw.push_back(fused_row(s));
      domains.push_back(s.domain);
      labels.push_back(s.label);
    }
    const std::size_t n = raw.size(), d = raw.front().size();

    moie::MoIEConfig mc;
    mc.d_input = d;
    mc.lambda = 1.0;
    mc.d_repr = 2;
    mc.disc_hidden = 64;
    Rng init(600 + seed);
    moie::MixtureOfInvariantExperts<double> net("moie", mc, init);
    nn::ParamList<double> params;
    net.collect(params);
    nn::Adam<double> opt({1e-3});
    const double alpha = 1.0;
    const std::size_t batch = 64, epochs = 100;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(700 + seed);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
      for (std::size_t lo = 0; lo < n; lo += batch) {
        const std::size_t hi = std::min(n, lo + batch), m = hi - lo;
        std::vector<double> x, y;
        std::vector<int> dm;
        for (std::size_t k = lo; k < hi; ++k) {
          x.insert(x.end(), raw[order[k]].begin(), raw[order[k]].end());
          y.push_back(labels[order[k]]);
          dm.push_back(domains[order[k]]);
        }
        nn::zero_grad<double>(params);
        Graph<double> g;
        const auto repr = net.forward(g, g.input({m, d}, x));
        const auto reg = adapter::loss_out<double>(y, net.predict_in(g, repr));
        g.backward(reg + ad::scale(net.domain_loss(g, repr, dm), alpha));
        opt.step(params);
      }
    }
    std::vector<std::vector<double>> reprs;
    double r2 = 0.0;
    {
      std::vector<double> x;
      for (const auto& r : raw) x.insert(x.end(), r.begin(), r.end());
      Graph<double> g;
      const auto repr = net.forward(g, g.input({n, d}, x));
      for (std::size_t i = 0; i < n; ++i) {
        reprs.emplace_back(repr.values().begin() + i * mc.d_repr, repr.values().begin() + (i + 1) * mc.d_repr);
      }
      const double mse = adapter::loss_out<double>(labels, net.predict_in(g, repr)).item();
      double mean = 0.0, var = 0.0;
      for (double y : labels) mean += y / n;
      for (double y : labels) var += (y - mean) * (y - mean) / n;
      r2 = 1.0 - mse / var;
    }
    const double on_repr = probe_accuracy(reprs, domains, 800 + seed);
    const double on_raw = probe_accuracy(raw, domains, 900 + seed);
    const bool ok = on_repr <= 0.6 && on_raw >= 0.9;
    passes += ok;
    o.detail << "seed " << seed << ": probe on expert outputs " << on_repr << ", on raw " << on_raw
             << ", label R^2 " << r2 << (ok ? " ok" : " miss") << "; ";
  }
  const double elapsed = seconds_since(t0);
  o.require(passes >= 2, "at least 2 of 3 seeds");
  o.require(elapsed < 300.0, "runtime under 5 minutes");
}

// ---------------------------------------------------------------------------------------------
// 6. Ablation ordering

void ablation_direction(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  double acc[4] = {0, 0, 0, 0};
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    harness::SyntheticSpec spec;
    spec.n_samples = 1500;
    spec.n_domains = 3;
    spec.test_domain = 2;
    spec.domain_shift_scale = 2.0;
    spec.seed = 1000 + seed;
    const auto ds = harness::generate(spec);
    pipeline::ModelConfig mc;
    mc.dims = ds.dims;
    pipeline::TrainConfig tc;
    tc.seed = 2000 + seed;
    const auto rows = pipeline::ablate(ds, mc, tc);
    for (std::size_t r = 0; r < 4; ++r) acc[r] += 100.0 * rows[r].metrics.acc / seeds;
  }
  // rows: (off,off), (moie only), (adapter only), (both)
  const double off = acc[0], moie_only = acc[1], adapter_only = acc[2], full = acc[3];
  o.detail << "mean ACC full " << full << ", experts only " << moie_only << ", adapter only " << adapter_only
           << ", both off " << off << "; ";
  o.require(full >= moie_only && full >= adapter_only, "full >= each single-module ablation");
  o.require(moie_only >= off && adapter_only >= off, "each single-module ablation >= both off");
  o.require(full - off >= 2.0, "full - both off >= 2 points");
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 900.0, "runtime under 15 minutes");
}

// ---------------------------------------------------------------------------------------------
// 7. Descent and determinism

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "midg");
  std::ostringstream out, e;
  const int code = cli::run_cli(args, out, e);
  if (err) *err = e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void descent_and_determinism(Outcome& o, const fs::path& dir) {
  int descended = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    harness::SyntheticSpec spec;
    spec.seed = 70 + seed;
    const auto ds = harness::generate(spec);
    pipeline::ModelConfig mc;
    mc.dims = ds.dims;
    pipeline::TrainConfig tc;
    tc.seed = seed;
    const auto log = pipeline::train(ds, mc, tc).log;
    const bool ok = log.size() == 10 && log[9].total < log[0].total;
    descended += ok;
    o.detail << "seed " << seed << ": " << log.front().total << " -> " << log.back().total << "; ";
  }
  o.require(descended == 5, "descent on 5/5 seeds");
  const auto data = (dir / "d7.txt").string();
  bool ran = cli({"gen", "--seed", "77", "--out", data}) == 0;
  for (const char* name : {"r1", "r2"}) {
    ran = ran && cli({"train", "--data", data, "--seed", "3", "--out", (dir / (std::string(name) + ".json")).string(),
                      "--log", (dir / (std::string(name) + ".jsonl")).string()}) == 0;
  }
  o.require(ran, "CLI training runs");
  const auto a = slurp(dir / "r1.jsonl"), b = slurp(dir / "r2.jsonl");
  o.require(!a.empty() && a == b, "byte-identical JSONL logs");
  o.detail << "JSONL logs " << (a == b ? "identical" : "differ") << " (" << a.size() << " bytes)";
}

// ---------------------------------------------------------------------------------------------
// 8. Round trip and robustness

void round_trip_and_fuzz(Outcome& o, const fs::path& dir) {
  Rng rng(808);
  int identical = 0;
  for (int trial = 0; trial < 50; ++trial) {
    harness::SyntheticSpec spec;
    spec.n_samples = 1 + rng.below(80);
    spec.dims = {1 + rng.below(10), 1 + rng.below(10), 1 + rng.below(10)};
    spec.n_domains = 1 + rng.below(4);
    spec.domain_shift_scale = rng.uniform(0, 3);
    spec.noise_std = rng.uniform(0, 2);
    spec.label_lo = rng.uniform(-5, 0);
    spec.label_hi = spec.label_lo + rng.uniform(0.5, 5);
    spec.seed = rng.next();
    const auto ds = harness::generate(spec);
    const auto path = dir / "rt.txt";
    harness::write_dataset(ds, path);
    identical += harness::read_dataset(path) == ds;
  }
  o.require(identical == 50, "round trip identity");

  harness::SyntheticSpec spec;
  spec.n_samples = 12;
  spec.dims = {3, 2, 2};
  std::ostringstream os;
  harness::write_dataset(harness::generate(spec), os);
  const std::string base = os.str();
  std::vector<std::string> lines;
  {
    std::istringstream is(base);
    for (std::string l; std::getline(is, l);) lines.push_back(l);
  }
  auto join = [](const std::vector<std::string>& ls) {
    std::string s;
    for (const auto& l : ls) s += l + "\n";
    return s;
  };
  auto tokens = [](const std::string& l) {
    std::istringstream is(l);
    std::vector<std::string> t;
    for (std::string w; is >> w;) t.push_back(w);
    return t;
  };
  auto untokens = [](const std::vector<std::string>& t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i) s += (i ? " " : "") + t[i];
    return s;
  };

  std::vector<std::pair<std::string, std::string>> cases;  // kind, content
  for (int i = 0; i < 100; ++i) {
    std::size_t cut = lines[0].size() + 2 + rng.below(base.size() - lines[0].size() - 3);
    while (base[cut - 1] == '\n') --cut;
    cases.emplace_back("truncation", base.substr(0, cut));
  }
  const char* bad_dims[] = {"MIDG1 3 2 3", "MIDG1 2 2 2", "MIDG1 3 2", "MIDG1 0 2 2", "MIDG1 -3 2 2",
                            "MIDG1 3 x 2", "MIDG1 3 2 2 9", "MIDG 3 2 2", "", "MIDG1 3.5 2 2"};
  for (int i = 0; i < 100; ++i) {
    auto ls = lines;
    ls[0] = bad_dims[i % 10];
    if (i >= 10) {
      auto t = tokens(ls[0]);
      if (t.size() == 4) t[1 + rng.below(3)] = std::to_string(4 + rng.below(20));
      ls[0] = untokens(t);
    }
    cases.emplace_back("bad dims", join(ls));
  }
  const char* garbage[] = {"abc", "1.2.3", "nan", "inf", "-", "1e", "0x", "--1", "1,5", "#"};
  for (int i = 0; i < 100; ++i) {
    auto ls = lines;
    const std::size_t r = 1 + rng.below(ls.size() - 1);
    auto t = tokens(ls[r]);
    const std::size_t col = 2 + rng.below(t.size() - 2);  // domain, label or a feature
    t[col] = garbage[rng.below(10)];
    ls[r] = untokens(t);
    cases.emplace_back("non-numeric", join(ls));
  }

  int structured = 0, crashes = 0;
  std::string first_miss;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto path = (dir / "fuzz.txt").string();
    std::ofstream(path, std::ios::binary) << cases[i].second;
    try {
      harness::read_dataset(fs::path(path));
    } catch (const ParseError&) {
    } catch (const DataError&) {
    } catch (...) {
      ++crashes;
    }
    std::string err;
    const int code = cli({"train", "--data", path, "--out", (dir / "fz.json").string(), "--epochs", "1"}, &err);
    const bool ok = code != 0 && (err.rfind("parse error:", 0) == 0 || err.rfind("data error:", 0) == 0) &&
                    !fs::exists(dir / "fz.json");
    structured += ok;
    if (!ok && first_miss.empty()) first_miss = cases[i].first + ": exit " + std::to_string(code) + " " + err;
  }
  o.require(crashes == 0, "no unstructured failures");
  o.require(structured == static_cast<int>(cases.size()), "structured error with nonzero exit");
  o.detail << identical << "/50 round trips identical; " << structured << "/" << cases.size()
           << " malformed files rejected with a parse/data error";
  if (!first_miss.empty()) o.detail << "; first miss: " << first_miss;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  const fs::path dir = fs::temp_directory_path() / "midg_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"closed-form oracles", closed_forms},
      {"structural invariants", structural},
      {"test protocol isolation", protocol_isolation},
      {"adversarial invariance emergence", invariance_emergence},
      {"ablation direction", ablation_direction},
      {"descent and determinism", [&](Outcome& o) { descent_and_determinism(o, dir); }},
      {"round trip and robustness", [&](Outcome& o) { round_trip_and_fuzz(o, dir); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    std::printf("%s  %d %-34s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
    failures += !o.pass;
  }
  fs::remove_all(dir);
  return failures == 0 ? 0 : 1;
}
