/*
 * Copyright 2026 The ibn-forecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IBN_CONFIG_HPP_
#define IBN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ibn/data.hpp"
#include "ibn/recurrent.hpp"
#include "ibn/train.hpp"

namespace ibn::config {

// Invalid configuration: unknown keys, wrong types, out-of-range values.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct DataSection
{
  std::string name = "synthetic";
  // "synthetic" generates the series in memory; "csv" reads the files below.
  std::string source = "synthetic";
  std::string series;
  std::string adjacency; // row-normalized matrix; takes precedence over coords
  std::string coords;
  std::optional<double> threshold; // default: median pairwise distance
  std::size_t history = 12;
  std::size_t horizon = 3;
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  data::SyntheticOptions synthetic;
};

struct MaskSection
{
  double rate = 0.5;
  std::optional<std::uint64_t> seed; // default: the experiment seed
};

struct AblationSection
{
  bool uai_to_ia = false;
  bool ggcn_to_agcn = false;
  bool bi_to_uni = false;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct RunConfig
{
  DataSection data;
  ModelConfig model; // n is filled in from the data
  train::TrainConfig train;
  MaskSection mask;
  AblationSection ablation;

  std::uint64_t seed() const { return train.seed; }
  std::uint64_t mask_seed() const { return mask.seed.value_or(train.seed); }
};

// Every accepted key with its default value.
nlohmann::json default_json();

// Defaults overlaid with `overlay`; unknown keys or mismatched types throw.
nlohmann::json merge(const nlohmann::json& base, const nlohmann::json& overlay,
                     const std::string& path = "");

// Dotted-path override, e.g. ("train.lr", "0.001"). The value is parsed as
// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& dotted, const std::string& value);

RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

nlohmann::json model_to_json(const ModelConfig& model);
ModelConfig model_from_json(const nlohmann::json& j);

// File, then dotted overrides, then IBN_SEED from the environment.
RunConfig load(const std::optional<std::filesystem::path>& file,
               const std::vector<std::pair<std::string, std::string>>& overrides,
               const char* env_seed = nullptr);

} // namespace ibn::config

#endif
