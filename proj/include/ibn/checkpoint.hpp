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

#ifndef IBN_CHECKPOINT_HPP_
#define IBN_CHECKPOINT_HPP_

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "ibn/recurrent.hpp"
#include "ibn/train.hpp"

// Checkpoint directory layout:
//   manifest.json  model config, run config, and an ordered list of
//                  {name, shape, offset} entries (offset in bytes)
//   weights.bin    little-endian float64 tensors concatenated in manifest order
//
// Entries cover the parameters, the predefined adjacency ("buffer.a_pre") and,
// when a training state is saved, the Adam moments ("adam.m.<name>",
// "adam.v.<name>") and the best-so-far parameters ("best.<name>").
namespace ibn::checkpoint {

struct Checkpoint
{
  ForecastModel model;
  nlohmann::json run_config; // null when not saved
  std::optional<train::TrainState> state;
};

void save(const std::filesystem::path& dir, const ForecastModel& model,
          const nlohmann::json& run_config = nullptr, const train::TrainState* state = nullptr);

Checkpoint load(const std::filesystem::path& dir);

} // namespace ibn::checkpoint

#endif
