// SPDX-License-Identifier: Apache-2.0
#include "midg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "midg/checkpoint.hpp"
#include "midg/errors.hpp"
#include "midg/gradcheck_suite.hpp"
#include "midg/harness/synthetic.hpp"
#include "midg/pipeline.hpp"

namespace midg::cli {

namespace {

using pipeline::Json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config entries become `--key=value` tokens unless the same flag was given explicitly.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream probe(path);
  if (!probe) return args;  // reported by the option validator
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    entries = parse_config_text(read_file(path));
  } catch (const ParseError& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
  std::vector<std::string> out = args;
  for (auto [key, value] : entries) {
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) out.push_back(flag + "=" + value);
  }
  return out;
}

struct TrainingOptions {
  pipeline::ModelConfig model;
  pipeline::TrainConfig train;
  bool sims_range = false;
  bool no_moie = false;
  bool no_adapter = false;
  std::string kv_mode = "stacked";
  std::string config;
};

void add_training_options(CLI::App* sub, TrainingOptions& o) {
  sub->add_option("--config", o.config, "flat key = value file; explicit flags win")->check(CLI::ExistingFile);
  auto& t = o.train;
  sub->add_option("--alpha", t.alpha, "weight on the domain-discrimination loss")->capture_default_str();
  sub->add_option("--beta", t.beta, "weight on the out-of-domain regression loss")->capture_default_str();
  sub->add_option("--gamma", t.gamma, "weight on the decoupling loss")->capture_default_str();
  sub->add_option("--delta", t.delta, "weight on the combined-prediction loss")->capture_default_str();
  sub->add_option("--w1", t.w1, "fusion weight of the in-domain prediction")->capture_default_str();
  sub->add_option("--w2", t.w2, "fusion weight of the out-of-domain prediction")->capture_default_str();
  sub->add_option("--lr", t.lr)->capture_default_str();
  sub->add_option("--epochs", t.epochs)->capture_default_str();
  sub->add_option("--batch-size", t.batch_size)->capture_default_str();
  sub->add_option("--seed", t.seed)->capture_default_str();
  sub->add_option("--label-lo", t.label_lo)->capture_default_str();
  sub->add_option("--label-hi", t.label_hi)->capture_default_str();
  sub->add_flag("--sims", o.sims_range, "labels in [-1, 1]");
  sub->add_flag("--grl-warmup", t.grl_warmup, "ramp the reversal strength over training");
  auto& m = o.model;
  sub->add_option("--d-code", m.d_code)->capture_default_str();
  sub->add_option("--encoder-hidden", m.encoder_hidden)->capture_default_str();
  sub->add_option("--experts", m.experts)->capture_default_str();
  sub->add_option("--router-hidden", m.router_hidden)->capture_default_str();
  sub->add_option("--expert-hidden", m.expert_hidden)->capture_default_str();
  sub->add_option("--d-repr", m.d_repr)->capture_default_str();
  sub->add_option("--disc-hidden", m.disc_hidden)->capture_default_str();
  sub->add_option("--head-hidden", m.head_hidden)->capture_default_str();
  sub->add_option("--lambda", m.lambda, "gradient reversal strength")->capture_default_str();
  sub->add_option("--heads", m.heads)->capture_default_str();
  sub->add_option("--dropout", m.dropout)->capture_default_str();
  sub->add_option("--adapter-hidden", m.adapter_hidden)->capture_default_str();
  sub->add_option("--d-fuse", m.d_fuse)->capture_default_str();
  sub->add_option("--kv-mode", o.kv_mode)->check(CLI::IsMember({"stacked", "literal"}))->capture_default_str();
  sub->add_flag("--no-moie", o.no_moie, "replace the experts by a plain fusion network");
  sub->add_flag("--no-adapter", o.no_adapter, "concatenate codes straight into fusion");
}

void finalize(TrainingOptions& o, const harness::Dims& dims) {
  if (o.sims_range) {
    o.train.label_lo = -1.0;
    o.train.label_hi = 1.0;
  }
  o.model.dims = dims;
  o.model.use_moie = !o.no_moie;
  o.model.use_adapter = !o.no_adapter;
  o.model.kv_mode = o.kv_mode == "literal" ? adapter::KeyValueMode::Literal : adapter::KeyValueMode::Stacked;
  o.model.validate();
  o.train.validate();
}

std::string format_metric(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

int cmd_gen(harness::SyntheticSpec spec, bool sims, const std::string& out_path, std::ostream& out) {
  if (sims) {
    spec.label_lo = -1.0;
    spec.label_hi = 1.0;
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto ds = harness::generate(spec);
  harness::write_dataset(ds, out_path);
  out << "wrote " << ds.samples.size() << " samples to " << out_path << "\n";
  return kExitOk;
}

harness::Dataset load_dataset(const std::string& path) { return harness::read_dataset(std::filesystem::path(path)); }

int cmd_train(TrainingOptions& o, const std::string& data, const std::string& params_out, const std::string& log_path,
              std::ostream& out) {
  const auto ds = load_dataset(data);
  try {
    finalize(o, ds.dims);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  std::string log;
  auto result = pipeline::train(ds, o.model, o.train, [&](const pipeline::EpochRecord& r) {
    const std::string line = pipeline::to_json(r).dump() + "\n";
    log += line;
    if (log_path.empty()) out << line << std::flush;
  });
  pipeline::save_checkpoint(params_out, o.train, result.model);
  if (!log_path.empty()) pipeline::write_text_file(log_path, log);
  return kExitOk;
}

harness::Split parse_split(const std::string& s) {
  if (s == "train") return harness::Split::Train;
  if (s == "valid") return harness::Split::Valid;
  return harness::Split::Test;
}

int cmd_eval(const std::string& params, const std::string& data, const std::string& split, const std::string& mode,
             const std::string& out_path, std::ostream& out) {
  auto cp = pipeline::load_checkpoint(params);
  const auto ds = load_dataset(data);
  if (!(ds.dims == cp.model_config.dims)) {
    throw DataError("dataset dims (" + std::to_string(ds.dims.t) + "," + std::to_string(ds.dims.a) + "," +
                    std::to_string(ds.dims.v) + ") do not match the trained model");
  }
  const auto samples = ds.select(parse_split(split));
  if (samples.empty()) throw DataError("split '" + split + "' has no samples");
  const auto pm = mode == "fusion" ? pipeline::PredictMode::TrainFusion : pipeline::PredictMode::Test;
  const auto report = pipeline::evaluate(cp.model, std::span<const harness::Sample* const>(samples), pm,
                                         cp.train_config.w1, cp.train_config.w2);
  const std::string text = pipeline::to_json(report).dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    pipeline::write_text_file(out_path, text);
  }
  return kExitOk;
}

int cmd_ablate(TrainingOptions& o, const std::string& data, const std::string& json_path, const std::string& csv_path,
               std::ostream& out) {
  const auto ds = load_dataset(data);
  try {
    finalize(o, ds.dims);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto rows = pipeline::ablate(ds, o.model, o.train);
  Json table = Json::array();
  std::ostringstream csv;
  csv << "moie,adapter,acc,f1,mae,corr,n,parameters\n";
  for (const auto& r : rows) {
    Json row{{"moie", r.moie}, {"adapter", r.adapter}};
    const Json metrics = pipeline::to_json(r.metrics);
    for (const auto& [k, v] : metrics.items()) row[k] = v;
    row["parameters"] = r.parameter_count;
    table.push_back(row);
    csv << (r.moie ? "on" : "off") << ',' << (r.adapter ? "on" : "off") << ',' << format_metric(r.metrics.acc)
        << ',' << format_metric(r.metrics.f1) << ',' << format_metric(r.metrics.mae) << ','
        << format_metric(r.metrics.corr) << ',' << r.metrics.n << ',' << r.parameter_count << "\n";
  }
  const std::string text = table.dump(2) + "\n";
  if (json_path.empty()) {
    out << text;
  } else {
    pipeline::write_text_file(json_path, text);
  }
  if (!csv_path.empty()) pipeline::write_text_file(csv_path, csv.str());
  return kExitOk;
}

int cmd_gradcheck(const GradcheckSuiteOptions& opt, std::ostream& out) {
  const auto cases = run_gradcheck_suite(opt);
  bool ok = true;
  for (const auto& c : cases) {
    out << std::left << std::setw(28) << c.name << " points=" << std::setw(4) << c.points
        << " max_err=" << std::scientific << std::setprecision(3) << c.max_error << std::defaultfloat << "  "
        << (c.passed ? "ok" : "FAIL") << "\n";
    ok = ok && c.passed;
  }
  out << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (" << cases.size() << " cases)\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected 'key = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ParseError(n, "empty key");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal domain-generalization sentiment regression", "midg"};
  app.require_subcommand(1);

  harness::SyntheticSpec spec;
  bool gen_sims = false;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a synthetic domain-shift dataset");
  gen->add_option("--out", gen_out, "dataset file to write")->required();
  gen->add_option("--samples", spec.n_samples)->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--dt", spec.dims.t, "text feature width")->capture_default_str();
  gen->add_option("--da", spec.dims.a, "audio feature width")->capture_default_str();
  gen->add_option("--dv", spec.dims.v, "vision feature width")->capture_default_str();
  gen->add_option("--domains", spec.n_domains)->capture_default_str();
  gen->add_option("--shift-scale", spec.domain_shift_scale)->capture_default_str();
  gen->add_option("--noise-std", spec.noise_std)->capture_default_str();
  gen->add_option("--nuisance-dims", spec.nuisance_dims)->capture_default_str();
  gen->add_option("--label-lo", spec.label_lo)->capture_default_str();
  gen->add_option("--label-hi", spec.label_hi)->capture_default_str();
  gen->add_flag("--sims", gen_sims, "labels in [-1, 1]");
  gen->add_option("--test-domain", spec.test_domain, "domain held out as the test split; -1 for a random split")
      ->capture_default_str();
  gen->add_option("--valid-fraction", spec.valid_fraction)->capture_default_str();
  gen->add_option("--test-fraction", spec.test_fraction)->capture_default_str();
  std::string gen_config;
  gen->add_option("--config", gen_config, "flat key = value file; explicit flags win")->check(CLI::ExistingFile);

  TrainingOptions train_opts;
  std::string train_data, train_out, train_log;
  auto* train = app.add_subcommand("train", "train a model and write its parameter file");
  train->add_option("--data", train_data, "dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "parameter file to write")->required();
  train->add_option("--log", train_log, "JSONL epoch log (default: stdout)");
  add_training_options(train, train_opts);

  std::string eval_params, eval_data, eval_split = "test", eval_mode = "test", eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate a parameter file on a dataset split");
  eval->add_option("--params", eval_params, "parameter file from train")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "dataset file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "valid", "test"}))->capture_default_str();
  eval->add_option("--mode", eval_mode, "test: out-of-domain branch only; fusion: weighted sum of both heads")
      ->check(CLI::IsMember({"test", "fusion"}))
      ->capture_default_str();
  eval->add_option("--out", eval_out, "metrics JSON file (default: stdout)");

  TrainingOptions ablate_opts;
  std::string ablate_data, ablate_json, ablate_csv;
  auto* abl = app.add_subcommand("ablate", "train and test the four module on/off combinations");
  abl->add_option("--data", ablate_data, "dataset file")->required()->check(CLI::ExistingFile);
  abl->add_option("--out", ablate_json, "JSON table (default: stdout)");
  abl->add_option("--csv", ablate_csv, "CSV table");
  add_training_options(abl, ablate_opts);

  GradcheckSuiteOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  grad->add_option("--points", gc.points_per_primitive, "random points per primitive")->capture_default_str();
  grad->add_option("--module-points", gc.points_per_module, "random points per module")->capture_default_str();
  grad->add_option("--seed", gc.seed)->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(spec, gen_sims, gen_out, out);
    if (train->parsed()) return cmd_train(train_opts, train_data, train_out, train_log, out);
    if (eval->parsed()) return cmd_eval(eval_params, eval_data, eval_split, eval_mode, eval_out, out);
    if (abl->parsed()) return cmd_ablate(ablate_opts, ablate_data, ablate_json, ablate_csv, out);
    if (grad->parsed()) return cmd_gradcheck(gc, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace midg::cli
