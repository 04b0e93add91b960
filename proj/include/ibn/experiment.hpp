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

#ifndef IBN_EXPERIMENT_HPP_
#define IBN_EXPERIMENT_HPP_

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "ibn/config.hpp"
#include "ibn/data.hpp"

namespace ibn {

inline constexpr const char* kVersion = "0.1.0";

// Series, graph and windowed splits resolved from a run configuration.
struct Experiment
{
  data::SeriesSet series;
  Tensor a_pre;
  data::Datasets datasets;
  std::optional<Tensor> ground_truth; // generator graph, synthetic data only
  std::uint64_t fingerprint = 0;
};

Experiment load_experiment(const config::RunConfig& config);

// Model dimensions from the config, with n taken from the data.
ModelConfig model_config(const config::RunConfig& config, std::size_t n);

// UTC timestamp such as 20261018T091500Z.
std::string utc_timestamp();

// Creates <root>/<timestamp>-seed<seed>, adding a numeric suffix if taken.
std::filesystem::path make_run_dir(const std::filesystem::path& root, std::uint64_t seed);

// Run manifest: resolved config, seed, dataset fingerprint, code version and
// start time. Written once before any work starts.
void write_run_manifest(const std::filesystem::path& run_dir, const config::RunConfig& config,
                        std::uint64_t fingerprint, const std::string& command,
                        const std::string& started_at);

// Completion record written next to the manifest when the command ends.
void write_run_status(const std::filesystem::path& run_dir, const std::string& started_at,
                      const std::string& status);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace ibn

#endif
