// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"
#include "rknode/attack.hpp"
#include "rknode/data.hpp"
#include "rknode/model.hpp"
#include "rknode/strategy.hpp"
#include "rknode/train.hpp"

namespace rknode {

// Every knob of the pipeline with its default value. Keys not present here
// are rejected by validate_config, so the document doubles as the schema.
nlohmann::json default_run_config();

// Recursively checks `user` against the defaults: unknown keys and type
// mismatches throw std::invalid_argument naming the full key path. Arrays
// are taken as opaque values. Returns defaults deep-merged with `user`.
nlohmann::json validate_config(const nlohmann::json& user);

// Reads, validates and merges a config file.
nlohmann::json load_config(const std::string& path);

// Builders from a merged config.
Dataset dataset_from_config(const nlohmann::json& cfg);
ModelConfig model_config_from_config(const nlohmann::json& cfg,
                                     const Dataset& data);
SolverStrategy strategy_from_config(const nlohmann::json& cfg);
AttackConfig attack_from_config(const nlohmann::json& cfg);
TrainConfig train_config_from_config(const nlohmann::json& cfg);

}  // namespace rknode
