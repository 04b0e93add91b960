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

#ifndef IBN_RECURRENT_HPP_
#define IBN_RECURRENT_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <span>
#include <vector>

#include "ibn/autodiff/ops.hpp"
#include "ibn/imputation.hpp"
#include "ibn/parameters.hpp"
#include "ibn/rng.hpp"

namespace ibn {

struct ModelConfig
{
  std::size_t n = 0;  // variables
  std::size_t h = 12; // history length
  std::size_t l = 3;  // horizon
  std::size_t c = 1;  // input features per variable
  std::size_t d = 8;  // hidden width
  std::size_t embed_dim = 8;

  double dropout = 0.1;
  std::size_t samples = 10;

  // Ablations.
  bool uai_to_ia = false;
  bool ggcn_to_agcn = false;
  bool bi_to_uni = false;

  // Alternative readings of the cell.
  bool tie_ggcn_weights = false;
  bool resample_per_gate = false;
  bool deterministic_eval = false;

  void validate() const;
  bool bidirectional() const { return !bi_to_uni; }
  std::size_t layer2_width() const { return bidirectional() ? 2 * d : d; }
};

enum class Phase
{
  train,
  eval
};

struct GGCNParams
{
  ParamId w_pre;
  ParamId w_gau;
};

struct CellParams
{
  std::size_t width = 0;
  // Interpolation attention and input projection; layer 1 only.
  bool has_ia = false;
  ParamId ia_embed;
  ParamId in_w;
  ParamId in_b;

  ParamId uai_w;
  ParamId uai_b;
  GGCNParams forget;
  GGCNParams reset;
  GGCNParams candidate;

  // Adaptive-graph embeddings; only with ggcn_to_agcn.
  ParamId agcn_e1;
  ParamId agcn_e2;
};

struct DecoderParams
{
  std::size_t channel_width = 0;
  ParamId conv1_w; // [L, 2, 1, channel_width]
  ParamId conv1_b; // [L]
  ParamId conv2_w; // [L, L, 1, 1]
  ParamId conv2_b; // [L]
};

class ForecastModel
{
public:
  ForecastModel(ModelConfig config, Tensor a_pre, std::uint64_t init_seed);

  const ModelConfig& config() const { return _config; }
  const Tensor& a_pre() const { return _a_pre; }
  ParameterSet& params() { return _params; }
  const ParameterSet& params() const { return _params; }

  const CellParams& layer1_fwd() const { return _layer1_fwd; }
  const CellParams& layer1_bwd() const { return _layer1_bwd; }
  const CellParams& layer2() const { return _layer2; }
  const DecoderParams& decoder() const { return _decoder; }

private:
  CellParams make_cell(const std::string& prefix, std::size_t width, bool with_ia,
                       std::mt19937_64& rng);

  ModelConfig _config;
  Tensor _a_pre;
  ParameterSet _params;
  CellParams _layer1_fwd;
  CellParams _layer1_bwd;
  CellParams _layer2;
  DecoderParams _decoder;
};

// Model parameters placed on a tape, as leaves or constants.
struct Binding
{
  ad::Tape* tape = nullptr;
  std::vector<ad::Var> params;
  ad::Var a_pre;

  ad::Var operator[](ParamId id) const { return params.at(id.index); }
};

Binding bind(const ForecastModel& model, ad::Tape& tape, bool differentiable = true);

// Test hooks forcing a gate to a constant.
struct CellHooks
{
  std::optional<double> force_forget;
  std::optional<double> force_reset;
};

struct StepTrace
{
  Tensor mu;
  Tensor sigma;
  Tensor x_hat;
  Tensor a_dyn;
};

struct CellContext
{
  const Binding* binding = nullptr;
  imputation::UAISettings uai;
  bool agcn = false;
  bool resample_per_gate = false;
  CellHooks hooks;
  // Interpolation weights of the cell being run; computed per step when unset.
  ad::Var ia_weights;
};

CellContext make_cell_context(const ForecastModel& model, const Binding& binding, Phase phase);

struct CellState
{
  ad::Var h;
  ad::Var c;
};

/// One recurrent step. The reconstructed input u = UAI(IA(x_t)) is computed
/// once and shared by the forget, reset and candidate branches.
CellState ibn_cell_step(const CellContext& ctx, const CellParams& cell, ad::Var x_t,
                        const Mask& mask, ad::Var c_prev, const Stream& stream,
                        StepTrace* trace = nullptr);

enum class Direction
{
  forward,
  backward
};

/// Runs a cell over the sequence. Processing step k draws from stream.child(k);
/// the returned hidden states are indexed by original time position.
std::vector<ad::Var> run_ru(const CellContext& ctx, const CellParams& cell,
                            std::span<const ad::Var> seq, const Mask& mask,
                            Direction direction, const Stream& stream,
                            std::vector<StepTrace>* trace = nullptr);

// Two-channel convolutional decoder, [n,w] x 2 -> [n,L].
ad::Var decode(const Binding& binding, const DecoderParams& params, ad::Var h1, ad::Var h2);

struct ForwardTrace
{
  // Layer-1 forward cell, one entry per time step.
  std::vector<StepTrace> layer1;
};

struct ForwardOptions
{
  Phase phase = Phase::train;
  Stream stream;
  CellHooks hooks;
  ForwardTrace* trace = nullptr;
};

// x_m: [N, H, C] with missing variables zero-filled; returns [N, L].
ad::Var ibn_forward(const ForecastModel& model, const Binding& binding, const Tensor& x_m,
                    const Mask& mask, const ForwardOptions& options);

// Convenience: no-gradient forward returning the prediction values.
Tensor predict(const ForecastModel& model, const Tensor& x_m, const Mask& mask,
               const ForwardOptions& options);

} // namespace ibn

#endif
