// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of configurations, trained parameters, epoch records and metrics.

#pragma once

#include <filesystem>

#include "json.hpp"
#include "midg/pipeline.hpp"

namespace midg::pipeline {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);
Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

/// Fields epoch, l_dis, l_in, l_out, l_reg, total.
Json to_json(const EpochRecord& record);
/// Fields acc, f1, mae, corr, n, corr_undefined.
Json to_json(const MetricsReport& report);

Json parameters_to_json(MidgModel<float>& model);
/// Throws DataError when names or sizes disagree with the model.
void load_parameters(MidgModel<float>& model, const Json& params);

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  MidgModel<float> model;
};

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& train_config, MidgModel<float>& model);
/// Throws ParseError on malformed JSON and DataError on inconsistent content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace midg::pipeline
