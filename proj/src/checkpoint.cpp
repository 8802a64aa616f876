// SPDX-License-Identifier: Apache-2.0
#include "midg/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "midg/errors.hpp"

namespace midg::pipeline {

namespace {

constexpr const char* kFormat = "midg-checkpoint-1";

std::string kv_mode_name(adapter::KeyValueMode mode) {
  return mode == adapter::KeyValueMode::Literal ? "literal" : "stacked";
}

adapter::KeyValueMode kv_mode_from(const std::string& s) {
  if (s == "stacked") return adapter::KeyValueMode::Stacked;
  if (s == "literal") return adapter::KeyValueMode::Literal;
  throw DataError("unknown kv_mode '" + s + "'");
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const ModelConfig& c) {
  return Json{{"dims", {c.dims.t, c.dims.a, c.dims.v}},
              {"d_code", c.d_code},
              {"encoder_hidden", c.encoder_hidden},
              {"experts", c.experts},
              {"router_hidden", c.router_hidden},
              {"expert_hidden", c.expert_hidden},
              {"d_repr", c.d_repr},
              {"disc_hidden", c.disc_hidden},
              {"head_hidden", c.head_hidden},
              {"lambda", c.lambda},
              {"heads", c.heads},
              {"dropout", c.dropout},
              {"adapter_hidden", c.adapter_hidden},
              {"d_fuse", c.d_fuse},
              {"kv_mode", kv_mode_name(c.kv_mode)},
              {"use_moie", c.use_moie},
              {"use_adapter", c.use_adapter}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  const auto dims = field<std::vector<std::size_t>>(j, "dims");
  if (dims.size() != 3) throw DataError("field 'dims' needs three entries");
  c.dims = {dims[0], dims[1], dims[2]};
  c.d_code = field<std::size_t>(j, "d_code");
  c.encoder_hidden = field<std::size_t>(j, "encoder_hidden");
  c.experts = field<std::size_t>(j, "experts");
  c.router_hidden = field<std::size_t>(j, "router_hidden");
  c.expert_hidden = field<std::size_t>(j, "expert_hidden");
  c.d_repr = field<std::size_t>(j, "d_repr");
  c.disc_hidden = field<std::size_t>(j, "disc_hidden");
  c.head_hidden = field<std::size_t>(j, "head_hidden");
  c.lambda = field<double>(j, "lambda");
  c.heads = field<std::size_t>(j, "heads");
  c.dropout = field<double>(j, "dropout");
  c.adapter_hidden = field<std::size_t>(j, "adapter_hidden");
  c.d_fuse = field<std::size_t>(j, "d_fuse");
  c.kv_mode = kv_mode_from(field<std::string>(j, "kv_mode"));
  c.use_moie = field<bool>(j, "use_moie");
  c.use_adapter = field<bool>(j, "use_adapter");
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"alpha", c.alpha},         {"beta", c.beta},
              {"gamma", c.gamma},         {"delta", c.delta},
              {"w1", c.w1},               {"w2", c.w2},
              {"lr", c.lr},               {"epochs", c.epochs},
              {"batch_size", c.batch_size}, {"seed", c.seed},
              {"label_lo", c.label_lo},   {"label_hi", c.label_hi},
              {"grl_warmup", c.grl_warmup}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.alpha = field<double>(j, "alpha");
  c.beta = field<double>(j, "beta");
  c.gamma = field<double>(j, "gamma");
  c.delta = field<double>(j, "delta");
  c.w1 = field<double>(j, "w1");
  c.w2 = field<double>(j, "w2");
  c.lr = field<double>(j, "lr");
  c.epochs = field<std::size_t>(j, "epochs");
  c.batch_size = field<std::size_t>(j, "batch_size");
  c.seed = field<std::uint64_t>(j, "seed");
  c.label_lo = field<double>(j, "label_lo");
  c.label_hi = field<double>(j, "label_hi");
  c.grl_warmup = field<bool>(j, "grl_warmup");
  return c;
}

Json to_json(const EpochRecord& r) {
  return Json{{"epoch", r.epoch}, {"l_dis", r.l_dis}, {"l_in", r.l_in},
              {"l_out", r.l_out}, {"l_reg", r.l_reg}, {"total", r.total}};
}

Json to_json(const MetricsReport& r) {
  return Json{{"acc", r.acc}, {"f1", r.f1},  {"mae", r.mae},
              {"corr", r.corr}, {"n", r.n}, {"corr_undefined", r.corr_undefined}};
}

Json parameters_to_json(MidgModel<float>& model) {
  Json out = Json::object();
  for (auto* p : model.parameters()) {
    const auto v = p->values();
    out[p->name()] = Json{{"shape", p->shape()}, {"values", std::vector<float>(v.begin(), v.end())}};
  }
  return out;
}

void load_parameters(MidgModel<float>& model, const Json& params) {
  if (!params.is_object()) throw DataError("parameters must be a JSON object");
  const auto list = model.parameters();
  if (params.size() != list.size()) {
    throw DataError("checkpoint holds " + std::to_string(params.size()) + " parameters, model has " +
                    std::to_string(list.size()));
  }
  for (auto* p : list) {
    if (!params.contains(p->name())) throw DataError("checkpoint lacks parameter '" + p->name() + "'");
    const auto& entry = params.at(p->name());
    const auto shape = field<std::vector<std::size_t>>(entry, "shape");
    const auto values = field<std::vector<float>>(entry, "values");
    if (shape != p->shape() || values.size() != p->size()) {
      throw DataError("parameter '" + p->name() + "' has shape " + ad::to_string(shape) + ", model expects " +
                      ad::to_string(p->shape()));
    }
    std::copy(values.begin(), values.end(), p->values().begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& train_config, MidgModel<float>& model) {
  Json j{{"format", kFormat},
         {"model", to_json(model.config())},
         {"train", to_json(train_config)},
         {"parameters", parameters_to_json(model)}};
  write_text_file(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format") || j.at("format") != kFormat) {
    throw DataError("'" + path.string() + "' is not a model checkpoint");
  }
  const auto mc = model_config_from_json(j.at("model"));
  const auto tc = train_config_from_json(j.at("train"));
  Checkpoint cp{mc, tc, MidgModel<float>(mc, 0)};
  if (!j.contains("parameters")) throw DataError("checkpoint lacks parameters");
  load_parameters(cp.model, j.at("parameters"));
  return cp;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f << content;
    if (!f.flush()) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace midg::pipeline
