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

#ifndef IBN_DATA_HPP_
#define IBN_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ibn/tensor.hpp"

namespace ibn::data {

// T x N observations, one column per variable.
struct SeriesSet
{
  Tensor values;
  std::vector<std::string> ids;
  double sampling_period = 1.0;
  std::optional<Tensor> coords; // [N, 2]

  std::size_t steps() const { return values.empty() ? 0 : values.dim(0); }
  std::size_t variables() const { return values.empty() ? 0 : values.dim(1); }
};

// CSV I/O. Series: header of variable ids, then one row per time step.
// Adjacency: N rows of N reals, no header. Coordinates: header "id,x,y".
// Reals are written with 17 significant digits so they round-trip exactly.
SeriesSet load_csv_series(const std::filesystem::path& path);
void save_csv_series(const std::filesystem::path& path, const SeriesSet& series);
Tensor load_adjacency(const std::filesystem::path& path);
void save_adjacency(const std::filesystem::path& path, const Tensor& matrix);
Tensor load_coords(const std::filesystem::path& path, std::vector<std::string>* ids = nullptr);
void save_coords(const std::filesystem::path& path, const Tensor& coords,
                 const std::vector<std::string>& ids);

// Shortest decimal form that parses back to the same double.
std::string format_real(double v);

struct Scaler
{
  std::vector<double> mean;
  std::vector<double> stddev;

  // Per-variable (x - mean) / std over a [T, N] matrix.
  Tensor apply(const Tensor& values) const;
  Tensor inverse(const Tensor& values) const;
  double inverse(double v, std::size_t variable) const { return v * stddev[variable] + mean[variable]; }
};

// Statistics over the given [T, N] rows; a zero std is clamped to 1.
Scaler zscore_fit(const Tensor& train_values);

struct SplitBounds
{
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;
};

// Chronological train / val / test boundaries over t steps.
SplitBounds chronological_split(std::size_t t, double train_ratio = 0.7, double val_ratio = 0.1);

std::size_t masked_count(std::size_t n, double rate);

// Draws exactly floor(rate * n) missing variables, uniformly without
// replacement. mask[i] == false marks variable i as missing.
Mask draw_variable_mask(std::size_t n, double rate, std::uint64_t seed);

struct MaskedSeries
{
  Tensor values; // [T, N], missing columns zero-filled
  Mask mask;
};

// Draws the mask and zero-fills the missing columns of normalized values.
MaskedSeries apply_variable_mask(const Tensor& normalized, double rate, std::uint64_t seed);
Tensor zero_fill(const Tensor& values, const Mask& mask);

struct Window
{
  Tensor x;      // [N, H, 1] model input, missing variables zero-filled
  Tensor x_true; // [N, H, 1] unmasked input, for diagnostics only
  Tensor y;      // [N, L] targets, never masked
  std::size_t start = 0;
};

// Sliding windows over rows [begin, end) of [T, N] matrices; window k starts
// at begin + k * stride and lies entirely inside the range.
std::vector<Window> window_dataset(const Tensor& masked, const Tensor& full, std::size_t begin,
                                   std::size_t end, std::size_t h, std::size_t l,
                                   std::size_t stride = 1);

struct DataOptions
{
  std::size_t history = 12;
  std::size_t horizon = 3;
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  double mask_rate = 0.5;
  std::uint64_t mask_seed = 0;
};

struct Datasets
{
  std::vector<Window> train;
  std::vector<Window> val;
  std::vector<Window> test;
  Mask mask;
  Scaler scaler;
  SplitBounds bounds;
};

// Normalizes with training statistics, masks variables, then windows each
// split separately.
Datasets prepare_datasets(const SeriesSet& series, const DataOptions& options);

struct SyntheticOptions
{
  std::size_t n = 12;
  std::size_t t = 2000;
  std::uint64_t seed = 7;
  double alpha = 0.3;
  double beta = 0.5;
  double period = 24.0;
  double noise_std = 0.1;
};

struct SyntheticData
{
  SeriesSet series; // includes coordinates
  Tensor graph;     // row-normalized ground-truth adjacency
  double threshold = 0.0;
};

/// Graph diffusion with periodic forcing:
///   x_{t+1} = (1 - alpha) x_t + alpha A x_t + beta sin(2 pi t / period + phi_i) + eps_t
/// Nodes sit uniformly in the unit square; A is the predefined-graph kernel
/// with its threshold at the median pairwise distance.
SyntheticData generate_synthetic(const SyntheticOptions& options);

// FNV-1a over the raw bytes of the values; identifies a dataset in manifests.
std::uint64_t fingerprint(const Tensor& values);

} // namespace ibn::data

#endif
