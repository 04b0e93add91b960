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

#ifndef IBN_DIAGNOSTICS_HPP_
#define IBN_DIAGNOSTICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ibn/data.hpp"
#include "ibn/recurrent.hpp"

namespace ibn::diagnostics {

// Average ranks, ties sharing the mean of their positions (1-based).
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation; empty when fewer than two points or when either
// column is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct UncertaintyRow
{
  std::size_t variable = 0;
  std::size_t window = 0; // start index of the window in the series
  double reconstruction_error = 0.0;
  double sigma = 0.0;
};

struct UncertaintyReport
{
  std::vector<UncertaintyRow> rows;
  std::optional<double> spearman;
};

/// Per masked variable and window, from the layer-1 forward cell:
///   reconstruction_error = mean |x_hat - target| over steps and features,
///   sigma                = mean sigma over steps and features,
/// where target is the UAI projection the cell would compute had the variable
/// been observed, i.e. (x_true in_w + in_b) W + b. Everything stays on the
/// normalized scale.
UncertaintyReport uncertainty_diagnostics(const ForecastModel& model,
                                          const std::vector<data::Window>& windows,
                                          const Mask& mask, std::uint64_t eval_seed);

void write_uncertainty_csv(const std::filesystem::path& path, const UncertaintyReport& report);

struct AdjacencyExport
{
  Tensor a_pre;
  Tensor a_dyn; // time-averaged dynamic graph of the layer-1 forward cell
};

AdjacencyExport export_adjacency(const ForecastModel& model, const data::Window& window,
                                 const Mask& mask, std::uint64_t eval_seed);

// Mean off-diagonal weight of `a` over pairs connected / unconnected in
// `truth` (truth > 0 means connected).
struct PairContrast
{
  double connected = 0.0;
  double unconnected = 0.0;
};

PairContrast pair_contrast(const Tensor& a, const Tensor& truth);

} // namespace ibn::diagnostics

#endif
