// SPDX-License-Identifier: Apache-2.0
#include "midg/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "midg/autodiff/ops.hpp"
#include "midg/errors.hpp"

namespace midg::pipeline {

void ModelConfig::validate() const {
  if (dims.t == 0 || dims.a == 0 || dims.v == 0) throw ConfigError("model: input dims must be positive");
  disentangle_config(dims.t).validate();
  moie_config().validate();
  adapter_config().validate();
}

disentangle::DisentangleConfig ModelConfig::disentangle_config(std::size_t d_input) const {
  return {d_input, d_code, encoder_hidden};
}

moie::MoIEConfig ModelConfig::moie_config() const {
  moie::MoIEConfig c;
  c.d_input = 3 * d_code;
  c.experts = experts;
  c.router_hidden = router_hidden;
  c.expert_hidden = expert_hidden;
  c.d_repr = d_repr;
  c.disc_hidden = disc_hidden;
  c.head_hidden = head_hidden;
  c.lambda = lambda;
  return c;
}

adapter::AdapterConfig ModelConfig::adapter_config() const {
  adapter::AdapterConfig c;
  c.d_code = d_code;
  c.heads = heads;
  c.dropout = dropout;
  c.mlp_hidden = adapter_hidden;
  c.d_fuse = d_fuse;
  c.head_hidden = head_hidden;
  c.mode = kv_mode;
  return c;
}

void TrainConfig::validate() const {
  for (double w : {alpha, beta, gamma, delta, w1, w2}) {
    if (!(w >= 0.0)) throw ConfigError("train: loss and fusion weights must be nonnegative");
  }
  if (std::abs(w1 + w2 - 1.0) > 1e-12) throw ConfigError("train: fusion weights w1 + w2 must equal 1");
  if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("train: batch size must be positive");
  if (!(label_lo < label_hi)) throw ConfigError("train: label range needs lo < hi");
}

Batch make_batch(std::span<const harness::Sample* const> samples, const harness::Dims& dims) {
  Batch b;
  const std::array<std::size_t, 3> widths = {dims.t, dims.a, dims.v};
  for (std::size_t m = 0; m < 3; ++m) b.features[m].reserve(samples.size() * widths[m]);
  for (const auto* s : samples) {
    const std::array<const std::vector<double>*, 3> vecs = {&s->t, &s->a, &s->v};
    for (std::size_t m = 0; m < 3; ++m) {
      if (vecs[m]->size() != widths[m]) {
        throw DataError("sample '" + s->id + "': modality " + std::to_string(m) + " has length " +
                        std::to_string(vecs[m]->size()) + ", model expects " + std::to_string(widths[m]));
      }
      b.features[m].insert(b.features[m].end(), vecs[m]->begin(), vecs[m]->end());
    }
    b.ids.push_back(s->id);
    b.labels.push_back(s->label);
  }
  return b;
}

template <std::floating_point T>
Tensor<T> total_loss(const LossComponents<T>& l, const TrainConfig& c) {
  return ad::scale(l.l_in, static_cast<T>(c.alpha)) + ad::scale(l.l_out, static_cast<T>(c.beta)) +
         ad::scale(l.l_dis, static_cast<T>(c.gamma)) + ad::scale(l.l_reg, static_cast<T>(c.delta));
}

double total_loss(double l_dis, double l_in, double l_out, double l_reg, const TrainConfig& c) {
  return c.alpha * l_in + c.beta * l_out + c.gamma * l_dis + c.delta * l_reg;
}

template <std::floating_point T>
MidgModel<T>::MidgModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng dis_rng(splitmix64(seed ^ 0xd15ULL));
  Rng in_rng(splitmix64(seed ^ 0x1bULL));
  Rng out_rng(splitmix64(seed ^ 0x0bULL));
  const std::array<std::size_t, 3> widths = {config_.dims.t, config_.dims.a, config_.dims.v};
  const char* names[3] = {"t", "a", "v"};
  for (std::size_t m = 0; m < 3; ++m) {
    dis_[m] =
        disentangle::Disentangler<T>(std::string("dis_") + names[m], config_.disentangle_config(widths[m]), dis_rng);
  }
  if (config_.use_moie) {
    moie_.emplace("moie", config_.moie_config(), in_rng);
  } else {
    plain_fusion_ = nn::Mlp2<T>("fusion", 3 * config_.d_code, config_.expert_hidden, config_.d_repr,
                                nn::Activation::Tanh, in_rng);
    plain_head_ = nn::Mlp2<T>("head_in", config_.d_repr, config_.head_hidden, 1, nn::Activation::Tanh, in_rng);
  }
  out_ = adapter::OutOfDomainBranch<T>("out", config_.adapter_config(), config_.use_adapter, out_rng);
}

template <std::floating_point T>
moie::MixtureOfInvariantExperts<T>& MidgModel<T>::moie() {
  if (!moie_) throw ContractError("model was built without the expert mixture");
  return *moie_;
}

template <std::floating_point T>
std::array<Tensor<T>, 3> MidgModel<T>::inputs(Graph<T>& g, const Batch& batch) const {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("empty batch");
  const std::array<std::size_t, 3> widths = {config_.dims.t, config_.dims.a, config_.dims.v};
  std::array<Tensor<T>, 3> out;
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& f = batch.features[m];
    out[m] = g.input({n, widths[m]}, std::vector<T>(f.begin(), f.end()));
  }
  return out;
}

template <std::floating_point T>
Tensor<T> MidgModel<T>::in_representation(Graph<T>& g, const Tensor<T>& fused) {
  return moie_ ? moie_->forward(g, fused) : ad::tanh(plain_fusion_(g, fused));
}

template <std::floating_point T>
Tensor<T> MidgModel<T>::in_head(Graph<T>& g, const Tensor<T>& repr) {
  return moie_ ? moie_->predict_in(g, repr) : plain_head_(g, repr);
}

template <std::floating_point T>
ForwardResult<T> MidgModel<T>::forward_train(Graph<T>& g, const Batch& batch, const TrainConfig& config,
                                             CounterRng& rng) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double y = batch.labels[i];
    if (!(y >= config.label_lo && y <= config.label_hi)) {
      std::ostringstream os;
      os << "sample '" << batch.ids[i] << "': label " << y << " outside [" << config.label_lo << ", "
         << config.label_hi << "]";
      throw DataError(os.str());
    }
  }
  const auto x = inputs(g, batch);
  const std::size_t n = batch.size();

  ForwardResult<T> r;
  std::array<Tensor<T>, 3> in_codes, out_codes;
  for (std::size_t m = 0; m < 3; ++m) {
    const auto pair = dis_[m].split(g, x[m], &rng);
    const auto l = dis_[m].loss(g, x[m], pair);
    r.losses.l_dis = m == 0 ? l : r.losses.l_dis + l;
    in_codes[m] = pair.in_sample;
    out_codes[m] = pair.out_sample;
  }

  const auto in_fused = ad::concat({in_codes[0], in_codes[1], in_codes[2]}, 1);
  const auto h_in = in_representation(g, in_fused);
  if (moie_) {
    // Both code distributions pass the experts and the reversal node: in-domain
    // codes carry domain label 0, out-of-domain codes label 1.
    const auto out_fused = ad::concat({out_codes[0], out_codes[1], out_codes[2]}, 1);
    const auto h_out = moie_->forward(g, out_fused);
    std::vector<int> domains(2 * n, 0);
    std::fill(domains.begin() + static_cast<std::ptrdiff_t>(n), domains.end(), 1);
    r.losses.l_in = moie_->domain_loss(g, ad::concat({h_in, h_out}, 0), domains);
  } else {
    r.losses.l_in = g.scalar(T(0));
  }
  r.y1 = in_head(g, h_in);
  r.y2 = out_.forward(g, out_codes, true, &rng);

  const std::vector<T> y(batch.labels.begin(), batch.labels.end());
  r.losses.l_out = adapter::loss_out<T>(y, r.y2);
  r.combined = ad::scale(r.y1, static_cast<T>(config.w1)) + ad::scale(r.y2, static_cast<T>(config.w2));
  r.losses.l_reg = adapter::loss_out<T>(y, r.combined);
  return r;
}

template <std::floating_point T>
std::vector<Prediction> MidgModel<T>::predict(const Batch& batch, PredictMode mode, double w1, double w2) {
  Graph<T> g;
  const auto x = inputs(g, batch);
  std::array<Tensor<T>, 3> out_codes;
  for (std::size_t m = 0; m < 3; ++m) out_codes[m] = dis_[m].encode(g, x[m], disentangle::Branch::Out).mean;
  const auto y2 = out_.forward(g, out_codes, false, nullptr).values();

  std::vector<Prediction> preds(batch.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i].y2 = static_cast<double>(y2[i]);
    preds[i].combined = preds[i].y2;
  }
  if (mode == PredictMode::Test) return preds;

  std::array<Tensor<T>, 3> in_codes;
  for (std::size_t m = 0; m < 3; ++m) in_codes[m] = dis_[m].encode(g, x[m], disentangle::Branch::In).mean;
  const auto y1 = in_head(g, in_representation(g, ad::concat({in_codes[0], in_codes[1], in_codes[2]}, 1))).values();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i].y1 = static_cast<double>(y1[i]);
    preds[i].combined = w1 * *preds[i].y1 + w2 * preds[i].y2;
  }
  return preds;
}

template <std::floating_point T>
Prediction MidgModel<T>::predict(const harness::Sample& sample, PredictMode mode, double w1, double w2) {
  const harness::Sample* one[1] = {&sample};
  return predict(make_batch(one, config_.dims), mode, w1, w2).front();
}

template <std::floating_point T>
nn::ParamList<T> MidgModel<T>::in_branch_parameters() {
  nn::ParamList<T> out;
  for (auto& d : dis_) d.collect_encoder(disentangle::Branch::In, out);
  if (moie_) {
    moie_->collect(out);
  } else {
    plain_fusion_.collect(out);
    plain_head_.collect(out);
  }
  return out;
}

template <std::floating_point T>
nn::ParamList<T> MidgModel<T>::out_branch_parameters() {
  nn::ParamList<T> out;
  for (auto& d : dis_) d.collect_encoder(disentangle::Branch::Out, out);
  out_.collect(out);
  return out;
}

template <std::floating_point T>
nn::ParamList<T> MidgModel<T>::decoder_parameters() {
  nn::ParamList<T> out;
  for (auto& d : dis_) d.decoder().collect(out);
  return out;
}

template <std::floating_point T>
nn::ParamList<T> MidgModel<T>::parameters() {
  auto out = in_branch_parameters();
  for (auto* p : out_branch_parameters()) out.push_back(p);
  for (auto* p : decoder_parameters()) out.push_back(p);
  return out;
}

namespace {

void shuffle(std::vector<const harness::Sample*>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

template <std::floating_point T>
std::vector<EpochRecord> fit(MidgModel<T>& model, const harness::Dataset& dataset, const TrainConfig& config,
                             const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.dims != model.config().dims) throw DataError("dataset dims differ from model dims");
  auto train = dataset.select(harness::Split::Train);
  if (train.empty()) throw ContractError("dataset has no train split");

  Rng order(splitmix64(config.seed ^ 0x0bde5ULL));
  CounterRng noise(splitmix64(config.seed ^ 0x2015eULL));
  nn::Adam<T> optimizer(nn::AdamOptions{config.lr});
  auto params = model.parameters();

  const std::size_t steps_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch * std::max<std::size_t>(config.epochs, 1));
  const double base_lambda = model.config().lambda;

  std::vector<EpochRecord> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(train, order);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      if (config.grl_warmup && model.config().use_moie) {
        const double progress = static_cast<double>(optimizer.steps()) / total_steps;
        model.moie().set_lambda(base_lambda * moie::grl_warmup(progress));
      }
      const std::size_t lo = step * config.batch_size;
      const std::size_t hi = std::min(train.size(), lo + config.batch_size);
      const auto batch = make_batch(std::span(train).subspan(lo, hi - lo), dataset.dims);

      Graph<T> g;
      const auto fwd = model.forward_train(g, batch, config, noise);
      const std::pair<const char*, double> parts[] = {{"l_dis", fwd.losses.l_dis.item()},
                                                      {"l_in", fwd.losses.l_in.item()},
                                                      {"l_out", fwd.losses.l_out.item()},
                                                      {"l_reg", fwd.losses.l_reg.item()}};
      for (const auto& [name, value] : parts) {
        if (!std::isfinite(value)) {
          throw NumericError(std::string(name) + " became non-finite at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
        }
      }
      const auto loss = total_loss(fwd.losses, config);
      nn::zero_grad<T>(params);
      g.backward(loss);
      optimizer.step(params);

      rec.l_dis += parts[0].second;
      rec.l_in += parts[1].second;
      rec.l_out += parts[2].second;
      rec.l_reg += parts[3].second;
    }
    const double inv = 1.0 / static_cast<double>(steps_per_epoch);
    rec.l_dis *= inv;
    rec.l_in *= inv;
    rec.l_out *= inv;
    rec.l_reg *= inv;
    rec.total = total_loss(rec.l_dis, rec.l_in, rec.l_out, rec.l_reg, config);
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (config.grl_warmup && model.config().use_moie) model.moie().set_lambda(base_lambda);
  return log;
}

TrainResult train(const harness::Dataset& dataset, const ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  TrainResult result{MidgModel<float>(model_config, config.seed), {}};
  result.log = fit(result.model, dataset, config, on_epoch);
  return result;
}

template <std::floating_point T>
MetricsReport evaluate(MidgModel<T>& model, std::span<const harness::Sample* const> samples, PredictMode mode,
                       double w1, double w2) {
  if (samples.empty()) throw ContractError("evaluate: empty split");
  std::vector<double> truth, predicted;
  constexpr std::size_t kChunk = 256;
  for (std::size_t lo = 0; lo < samples.size(); lo += kChunk) {
    const auto part = samples.subspan(lo, std::min(kChunk, samples.size() - lo));
    const auto batch = make_batch(part, model.config().dims);
    for (const auto& p : model.predict(batch, mode, w1, w2)) predicted.push_back(p.combined);
    truth.insert(truth.end(), batch.labels.begin(), batch.labels.end());
  }
  return compute_metrics(truth, predicted);
}

std::vector<AblationRow> ablate(const harness::Dataset& dataset, const ModelConfig& model_config,
                                const TrainConfig& config) {
  const auto test = dataset.select(harness::Split::Test);
  if (test.empty()) throw ContractError("ablate: dataset has no test split");
  std::vector<AblationRow> rows;
  for (const auto& [use_moie, use_adapter] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
    ModelConfig mc = model_config;
    mc.use_moie = use_moie;
    mc.use_adapter = use_adapter;
    TrainConfig tc = config;
    if (!use_moie) tc.alpha = 0.0;
    auto result = train(dataset, mc, tc);
    AblationRow row;
    row.moie = use_moie;
    row.adapter = use_adapter;
    row.metrics = evaluate(result.model, test, PredictMode::Test);
    row.parameter_count = nn::count_parameters<float>(result.model.parameters());
    rows.push_back(row);
  }
  return rows;
}

template Tensor<float> total_loss(const LossComponents<float>&, const TrainConfig&);
template Tensor<double> total_loss(const LossComponents<double>&, const TrainConfig&);
template class MidgModel<float>;
template class MidgModel<double>;
template std::vector<EpochRecord> fit(MidgModel<float>&, const harness::Dataset&, const TrainConfig&,
                                      const EpochCallback&);
template std::vector<EpochRecord> fit(MidgModel<double>&, const harness::Dataset&, const TrainConfig&,
                                      const EpochCallback&);
template MetricsReport evaluate(MidgModel<float>&, std::span<const harness::Sample* const>, PredictMode, double,
                                double);
template MetricsReport evaluate(MidgModel<double>&, std::span<const harness::Sample* const>, PredictMode, double,
                                double);

}  // namespace midg::pipeline
