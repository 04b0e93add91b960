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

#include "ibn/recurrent.hpp"

#include <cmath>
#include <stdexcept>

#include "ibn/graph.hpp"

namespace ibn {

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Shape shape, std::mt19937_64& rng)
{
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor gaussian(Shape shape, double stddev, std::mt19937_64& rng)
{
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Stream tags for the three recurrent units.
constexpr std::uint64_t kLayer1Forward = 1;
constexpr std::uint64_t kLayer1Backward = 2;
constexpr std::uint64_t kLayer2 = 3;

} // namespace

void ModelConfig::validate() const
{
  if (n == 0 || h == 0 || l == 0 || c == 0 || d == 0 || embed_dim == 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (samples == 0) throw std::invalid_argument("Monte Carlo sample count must be at least 1");
}

ForecastModel::ForecastModel(ModelConfig config, Tensor a_pre, std::uint64_t init_seed)
: _config(config), _a_pre(std::move(a_pre))
{
  _config.validate();
  if (_a_pre.shape() != Shape{_config.n, _config.n})
    throw std::invalid_argument("predefined adjacency " + to_string(_a_pre.shape()) +
                                " does not match " + std::to_string(_config.n) + " variables");

  std::mt19937_64 rng(init_seed);
  _layer1_fwd = make_cell("layer1_fwd", _config.d, true, rng);
  if (_config.bidirectional()) _layer1_bwd = make_cell("layer1_bwd", _config.d, true, rng);
  _layer2 = make_cell("layer2", _config.layer2_width(), false, rng);

  const std::size_t w = _config.layer2_width();
  const std::size_t L = _config.l;
  _decoder.channel_width = w;
  _decoder.conv1_w = _params.add("decoder.conv1.weight", xavier(2 * w, L, {L, 2, 1, w}, rng));
  _decoder.conv1_b = _params.add("decoder.conv1.bias", Tensor({L}));
  _decoder.conv2_w = _params.add("decoder.conv2.weight", xavier(L, L, {L, L, 1, 1}, rng));
  _decoder.conv2_b = _params.add("decoder.conv2.bias", Tensor({L}));
}

CellParams ForecastModel::make_cell(const std::string& prefix, std::size_t width, bool with_ia,
                                    std::mt19937_64& rng)
{
  const auto& cfg = _config;
  CellParams cell;
  cell.width = width;
  cell.has_ia = with_ia;
  if (with_ia)
  {
    cell.ia_embed = _params.add(prefix + ".ia.embed", gaussian({cfg.n, cfg.embed_dim}, 1.0, rng));
    cell.in_w = _params.add(prefix + ".ia.in_w", xavier(cfg.c, width, {cfg.c, width}, rng));
    cell.in_b = _params.add(prefix + ".ia.in_b", Tensor({width}));
  }
  cell.uai_w = _params.add(prefix + ".uai.w", xavier(width, width, {width, width}, rng));
  cell.uai_b = _params.add(prefix + ".uai.b", Tensor({width}));

  auto ggcn = [&](const std::string& gate) {
    GGCNParams g;
    g.w_pre = _params.add(prefix + ".ggcn_" + gate + ".w_pre",
                          xavier(width, width, {width, width}, rng));
    g.w_gau = cfg.tie_ggcn_weights
                ? g.w_pre
                : _params.add(prefix + ".ggcn_" + gate + ".w_gau",
                              xavier(width, width, {width, width}, rng));
    return g;
  };
  cell.forget = ggcn("f");
  cell.reset = ggcn("r");
  cell.candidate = ggcn("c");

  if (cfg.ggcn_to_agcn)
  {
    cell.agcn_e1 = _params.add(prefix + ".agcn.e1", gaussian({cfg.n, cfg.embed_dim}, 1.0, rng));
    cell.agcn_e2 = _params.add(prefix + ".agcn.e2", gaussian({cfg.n, cfg.embed_dim}, 1.0, rng));
  }
  return cell;
}

Binding bind(const ForecastModel& model, ad::Tape& tape, bool differentiable)
{
  Binding b;
  b.tape = &tape;
  const auto& ps = model.params();
  b.params.reserve(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i)
    b.params.push_back(differentiable ? tape.leaf(ps.value(i)) : tape.constant(ps.value(i)));
  b.a_pre = tape.constant(model.a_pre());
  return b;
}

CellContext make_cell_context(const ForecastModel& model, const Binding& binding, Phase phase)
{
  const auto& cfg = model.config();
  CellContext ctx;
  ctx.binding = &binding;
  ctx.uai.p = cfg.dropout;
  ctx.uai.samples = cfg.samples;
  ctx.uai.deterministic = cfg.uai_to_ia || (phase == Phase::eval && cfg.deterministic_eval);
  ctx.agcn = cfg.ggcn_to_agcn;
  ctx.resample_per_gate = cfg.resample_per_gate;
  return ctx;
}

CellState ibn_cell_step(const CellContext& ctx, const CellParams& cell, ad::Var x_t,
                        const Mask& mask, ad::Var c_prev, const Stream& stream,
                        StepTrace* trace)
{
  const Binding& B = *ctx.binding;
  ad::Tape& tape = *B.tape;
  const std::size_t n = mask.size();

  ad::Var x = x_t;
  if (cell.has_ia)
  {
    x = ad::add_bias(ad::matmul(x_t, B[cell.in_w]), B[cell.in_b]);
    x = ctx.ia_weights.valid() ? imputation::interpolate(x, mask, ctx.ia_weights)
                               : imputation::interpolation_attention(x, mask, B[cell.ia_embed]);
  }
  if (x.shape() != Shape{n, cell.width} || c_prev.shape() != Shape{n, cell.width})
    throw std::invalid_argument("cell of width " + std::to_string(cell.width) + " got input " +
                                to_string(x.shape()) + " and state " + to_string(c_prev.shape()));

  auto reconstruct = [&](const Stream& s) {
    return imputation::uai_forward(x, B[cell.uai_w], B[cell.uai_b], ctx.uai, s);
  };
  auto dynamic_graph = [&](ad::Var features) {
    if (ctx.agcn)
      return graph::GraphPair{B.a_pre, graph::adaptive_adjacency(B[cell.agcn_e1], B[cell.agcn_e2]),
                              0.0, n};
    return graph::make_graph_pair(B.a_pre, features);
  };
  auto weights = [&](const GGCNParams& g) { return graph::GGCNWeights{B[g.w_pre], B[g.w_gau]}; };

  struct GateInput
  {
    ad::Var u;
    graph::Propagated features;
  };
  auto prepare = [&](const imputation::UAIOutput& u) {
    return GateInput{u.x_hat, graph::propagate(u.x_hat, dynamic_graph(u.x_hat))};
  };

  // One reconstruction for all gates, or one per gate (forget, reset,
  // candidate, output) when resampling.
  const auto shared = reconstruct(ctx.resample_per_gate ? stream.child(0) : stream);
  const auto shared_graph = dynamic_graph(shared.x_hat);
  const GateInput shared_input{shared.x_hat, graph::propagate(shared.x_hat, shared_graph)};
  auto gate_input = [&](std::uint64_t gate) {
    if (!ctx.resample_per_gate || gate == 0) return shared_input;
    return prepare(reconstruct(stream.child(gate)));
  };

  if (trace)
  {
    trace->mu = shared.mu.value();
    trace->sigma = shared.sigma.value();
    trace->x_hat = shared.x_hat.value();
    trace->a_dyn = shared_graph.a_gau.value();
  }

  ad::Var f;
  if (ctx.hooks.force_forget)
    f = tape.constant(Tensor({n, cell.width}, *ctx.hooks.force_forget));
  else
    f = ad::gelu(graph::ggcn_combine(gate_input(0).features, weights(cell.forget)));

  ad::Var r;
  if (ctx.hooks.force_reset)
    r = tape.constant(Tensor({n, cell.width}, *ctx.hooks.force_reset));
  else
    r = ad::gelu(graph::ggcn_combine(gate_input(1).features, weights(cell.reset)));

  auto candidate = graph::ggcn_combine(gate_input(2).features, weights(cell.candidate));
  auto c = ad::add(ad::mul(f, c_prev), ad::mul(ad::one_minus(f), candidate));

  auto u_h = ctx.resample_per_gate ? reconstruct(stream.child(3)).x_hat : shared.x_hat;
  auto h = ad::add(ad::mul(ad::one_minus(r), u_h), ad::mul(r, ad::elu(c)));
  return {h, c};
}

std::vector<ad::Var> run_ru(const CellContext& ctx, const CellParams& cell,
                            std::span<const ad::Var> seq, const Mask& mask,
                            Direction direction, const Stream& stream,
                            std::vector<StepTrace>* trace)
{
  if (seq.empty()) throw std::invalid_argument("recurrent unit needs a non-empty sequence");
  const std::size_t steps = seq.size();
  std::vector<ad::Var> hidden(steps);
  if (trace) trace->assign(steps, StepTrace{});

  CellContext local = ctx;
  if (cell.has_ia && !local.ia_weights.valid())
    local.ia_weights = imputation::interpolation_weights(mask, (*ctx.binding)[cell.ia_embed]);

  ad::Var c = ctx.binding->tape->constant(Tensor({mask.size(), cell.width}));
  for (std::size_t k = 0; k < steps; ++k)
  {
    const std::size_t t = direction == Direction::forward ? k : steps - 1 - k;
    auto state = ibn_cell_step(local, cell, seq[t], mask, c, stream.child(k),
                               trace ? &(*trace)[t] : nullptr);
    hidden[t] = state.h;
    c = state.c;
  }
  return hidden;
}

ad::Var decode(const Binding& binding, const DecoderParams& params, ad::Var h1, ad::Var h2)
{
  const std::size_t w = params.channel_width;
  if (h1.shape().size() != 2 || h1.shape()[1] != w || h2.shape() != h1.shape())
    throw std::invalid_argument("decoder expects two [n," + std::to_string(w) + "] inputs, got " +
                                to_string(h1.shape()) + " and " + to_string(h2.shape()));
  auto k1 = binding[params.conv1_w];
  const std::size_t L = k1.shape()[0];
  // A 1 x w kernel over two stacked channels is a dense map from the
  // channel-concatenated row to L outputs.
  auto stacked = ad::concat({h1, h2});
  auto w1 = ad::transpose(ad::reshape(k1, {L, 2 * w}));
  auto z = ad::gelu(ad::add_bias(ad::matmul(stacked, w1), binding[params.conv1_b]));
  auto w2 = ad::transpose(ad::reshape(binding[params.conv2_w], {L, L}));
  return ad::add_bias(ad::matmul(z, w2), binding[params.conv2_b]);
}

ad::Var ibn_forward(const ForecastModel& model, const Binding& binding, const Tensor& x_m,
                    const Mask& mask, const ForwardOptions& options)
{
  const auto& cfg = model.config();
  if (x_m.shape() != Shape{cfg.n, cfg.h, cfg.c})
    throw std::invalid_argument("input window " + to_string(x_m.shape()) + " does not match model " +
                                to_string(Shape{cfg.n, cfg.h, cfg.c}));
  if (mask.size() != cfg.n)
    throw std::invalid_argument("mask has " + std::to_string(mask.size()) + " entries for " +
                                std::to_string(cfg.n) + " variables");

  ad::Tape& tape = *binding.tape;
  std::vector<ad::Var> inputs;
  inputs.reserve(cfg.h);
  for (std::size_t t = 0; t < cfg.h; ++t)
  {
    Tensor x_t({cfg.n, cfg.c});
    for (std::size_t i = 0; i < cfg.n; ++i)
      for (std::size_t k = 0; k < cfg.c; ++k) x_t.at(i, k) = x_m[(i * cfg.h + t) * cfg.c + k];
    inputs.push_back(tape.constant(std::move(x_t)));
  }

  CellContext ctx = make_cell_context(model, binding, options.phase);
  ctx.hooks = options.hooks;

  auto fwd = run_ru(ctx, model.layer1_fwd(), inputs, mask, Direction::forward,
                    options.stream.child(kLayer1Forward),
                    options.trace ? &options.trace->layer1 : nullptr);

  std::vector<ad::Var> layer2_in;
  ad::Var last1;
  if (cfg.bidirectional())
  {
    auto bwd = run_ru(ctx, model.layer1_bwd(), inputs, mask, Direction::backward,
                      options.stream.child(kLayer1Backward));
    for (std::size_t t = 0; t < cfg.h; ++t) layer2_in.push_back(ad::concat({fwd[t], bwd[t]}));
    last1 = layer2_in.back();
  }
  else
  {
    layer2_in = fwd;
    last1 = fwd.back();
  }

  const Mask observed(cfg.n, true);
  auto hid2 = run_ru(ctx, model.layer2(), layer2_in, observed, Direction::forward,
                     options.stream.child(kLayer2));
  return decode(binding, model.decoder(), last1, hid2.back());
}

Tensor predict(const ForecastModel& model, const Tensor& x_m, const Mask& mask,
               const ForwardOptions& options)
{
  ad::Tape tape;
  auto binding = bind(model, tape, false);
  return ibn_forward(model, binding, x_m, mask, options).value();
}

} // namespace ibn
