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

#ifndef IBN_TRAIN_HPP_
#define IBN_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibn/data.hpp"
#include "ibn/recurrent.hpp"

namespace ibn::train {

inline constexpr double kMapeFloor = 1e-3;

struct MetricReport
{
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape; // percent; empty when every target is near zero
  std::vector<double> mae_per_variable;
  std::vector<double> rmse_per_variable;
  std::vector<std::optional<double>> mape_per_variable;
  double normalized_mae = 0.0; // MAE before inverse scaling
  std::size_t count = 0;

  bool operator==(const MetricReport&) const = default;
};

// Running sums over [N, L] prediction blocks.
class MetricAccumulator
{
public:
  explicit MetricAccumulator(std::size_t variables);

  // y / y_hat in original units; the normalized pair feeds normalized_mae.
  void add(const Tensor& y, const Tensor& y_hat);
  void add_normalized(const Tensor& y, const Tensor& y_hat);

  MetricReport report() const;

private:
  std::size_t _n;
  std::vector<double> _abs, _sq, _pct;
  std::vector<std::size_t> _count, _pct_count;
  double _norm_abs = 0.0;
  std::size_t _norm_count = 0;
};

// Rows of y are variables; every column is one target.
MetricReport metrics(const Tensor& y, const Tensor& y_hat);

struct AdamConfig
{
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0; // <= 0 disables clipping
};

struct AdamState
{
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  bool operator==(const AdamState&) const = default;
};

// Scales grads in place so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// Clips, then applies one bias-corrected Adam update.
void adam_step(ParameterSet& params, std::vector<Tensor> grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig
{
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  std::uint64_t seed = 1;
  // Each epoch visits every train_stride-th window, rotating the offset.
  std::size_t train_stride = 1;
  std::uint64_t eval_seed = 0x5eed;

  void validate() const;
};

struct EpochRecord
{
  std::size_t epoch = 0;
  double train_mae = 0.0; // normalized scale
  double val_mae = 0.0;   // normalized scale
  double seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

// Everything needed to continue an interrupted run.
struct TrainState
{
  std::size_t epoch = 0; // completed epochs
  AdamState adam;
  std::vector<EpochRecord> history;
  std::optional<ParameterSet> best;
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  std::size_t stale_epochs = 0;
  bool finished = false;
};

class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions
{
  // Stop after this many completed epochs without finishing, so the run can
  // be checkpointed and resumed.
  std::optional<std::size_t> pause_after;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Minimizes normalized MAE over all variables. On completion the model holds
// the best-validation parameters.
void train(ForecastModel& model, const data::Datasets& data, const TrainConfig& config,
           TrainState& state, const TrainOptions& options = {});

TrainState train(ForecastModel& model, const data::Datasets& data, const TrainConfig& config);

// One window's loss and gradients (used by training and gradient tests).
struct SampleGradient
{
  double loss = 0.0;
  std::vector<Tensor> grads;
};

SampleGradient sample_gradient(const ForecastModel& model, const data::Window& window,
                               const Mask& mask, const Stream& stream);

// Normalized MAE with eval-phase forward passes, seeded per window.
double normalized_mae(const ForecastModel& model, const std::vector<data::Window>& windows,
                      const Mask& mask, std::uint64_t eval_seed);

Stream eval_stream(std::uint64_t eval_seed, const data::Window& window);

// Metrics in original units, plus normalized MAE.
MetricReport evaluate(const ForecastModel& model, const std::vector<data::Window>& windows,
                      const Mask& mask, const data::Scaler& scaler, std::uint64_t eval_seed);

// Last observed (masked) value repeated over the horizon; missing variables
// therefore predict the training mean.
MetricReport last_value_baseline(const std::vector<data::Window>& windows,
                                 const data::Scaler& scaler);
MetricReport train_mean_baseline(const std::vector<data::Window>& windows,
                                 const data::Scaler& scaler);

struct Variant
{
  std::string name;
  ModelConfig config;
};

// Full model plus the three single-component ablations, in table order.
std::vector<Variant> ablation_variants(const ModelConfig& base);

struct VariantResult
{
  std::string name;
  MetricReport test;
  std::size_t parameters = 0;
  std::size_t epochs = 0;
};

std::vector<VariantResult> ablate(const ModelConfig& base, const Tensor& a_pre,
                                  const data::Datasets& data, const TrainConfig& config,
                                  std::uint64_t init_seed);

// One row per dataset; columns are variant x {RMSE, MAPE, MAE}.
std::string ablation_csv_header(const std::vector<VariantResult>& results);
std::string ablation_csv_row(const std::string& dataset, const std::vector<VariantResult>& results);

} // namespace ibn::train

#endif
