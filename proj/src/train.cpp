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

#include "ibn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace ibn::train {

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566ULL;
constexpr std::uint64_t kDropoutTag = 0x64726f70ULL;

void require_same_shape(const Tensor& y, const Tensor& y_hat)
{
  if (y.shape() != y_hat.shape() || y.rank() != 2)
    throw std::invalid_argument("shape mismatch in metrics: " + to_string(y.shape()) + " vs " +
                                to_string(y_hat.shape()));
}

// Undo the per-variable scaling of an [N, L] block.
Tensor to_original(const Tensor& block, const data::Scaler& scaler)
{
  Tensor out = block;
  for (std::size_t i = 0; i < block.dim(0); ++i)
    for (std::size_t k = 0; k < block.dim(1); ++k) out.at(i, k) = scaler.inverse(block.at(i, k), i);
  return out;
}

std::string first_non_finite(const ForecastModel& model)
{
  const auto& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (double v : ps.value(i).data())
      if (!std::isfinite(v)) return "parameter " + ps.name(i);
  return {};
}

} // namespace

MetricAccumulator::MetricAccumulator(std::size_t variables)
: _n(variables), _abs(variables), _sq(variables), _pct(variables), _count(variables),
  _pct_count(variables)
{
}

void MetricAccumulator::add(const Tensor& y, const Tensor& y_hat)
{
  require_same_shape(y, y_hat);
  if (y.dim(0) != _n)
    throw std::invalid_argument("metric block has " + std::to_string(y.dim(0)) + " rows, expected " +
                                std::to_string(_n));
  for (std::size_t i = 0; i < _n; ++i)
    for (std::size_t k = 0; k < y.dim(1); ++k)
    {
      const double truth = y.at(i, k);
      const double err = std::abs(truth - y_hat.at(i, k));
      _abs[i] += err;
      _sq[i] += err * err;
      ++_count[i];
      if (std::abs(truth) > kMapeFloor)
      {
        _pct[i] += err / std::abs(truth);
        ++_pct_count[i];
      }
    }
}

void MetricAccumulator::add_normalized(const Tensor& y, const Tensor& y_hat)
{
  require_same_shape(y, y_hat);
  for (std::size_t i = 0; i < y.size(); ++i) _norm_abs += std::abs(y[i] - y_hat[i]);
  _norm_count += y.size();
}

MetricReport MetricAccumulator::report() const
{
  MetricReport r;
  double abs = 0.0, sq = 0.0, pct = 0.0;
  std::size_t count = 0, pct_count = 0;
  for (std::size_t i = 0; i < _n; ++i)
  {
    const double c = static_cast<double>(std::max<std::size_t>(_count[i], 1));
    r.mae_per_variable.push_back(_abs[i] / c);
    r.rmse_per_variable.push_back(std::sqrt(_sq[i] / c));
    r.mape_per_variable.push_back(_pct_count[i] ? std::optional<double>(
                                                      100.0 * _pct[i] / static_cast<double>(_pct_count[i]))
                                                : std::nullopt);
    abs += _abs[i];
    sq += _sq[i];
    pct += _pct[i];
    count += _count[i];
    pct_count += _pct_count[i];
  }
  r.count = count;
  if (count)
  {
    r.mae = abs / static_cast<double>(count);
    r.rmse = std::sqrt(sq / static_cast<double>(count));
  }
  if (pct_count) r.mape = 100.0 * pct / static_cast<double>(pct_count);
  if (_norm_count) r.normalized_mae = _norm_abs / static_cast<double>(_norm_count);
  return r;
}

MetricReport metrics(const Tensor& y, const Tensor& y_hat)
{
  require_same_shape(y, y_hat);
  MetricAccumulator acc(y.dim(0));
  acc.add(y, y_hat);
  return acc.report();
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm)
{
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm)
  {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.data()) v *= s;
  }
  return norm;
}

void adam_step(ParameterSet& params, std::vector<Tensor> grads, AdamState& state,
               const AdamConfig& config)
{
  if (grads.size() != params.size())
    throw std::invalid_argument("got " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  if (state.m.empty())
  {
    for (std::size_t i = 0; i < params.size(); ++i)
    {
      state.m.emplace_back(params.value(i).shape());
      state.v.emplace_back(params.value(i).shape());
    }
  }
  clip_global_norm(grads, config.clip_norm);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i)
  {
    auto p = params.value(i).data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    if (g.size() != p.size())
      throw std::invalid_argument("gradient shape mismatch for " + params.name(i));
    for (std::size_t k = 0; k < p.size(); ++k)
    {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void TrainConfig::validate() const
{
  if (!(adam.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("adam betas must be in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (patience == 0) throw std::invalid_argument("patience must be positive");
  if (train_stride == 0) throw std::invalid_argument("train stride must be positive");
}

SampleGradient sample_gradient(const ForecastModel& model, const data::Window& window,
                               const Mask& mask, const Stream& stream)
{
  ad::Tape tape;
  auto binding = bind(model, tape, true);
  ForwardOptions opts;
  opts.phase = Phase::train;
  opts.stream = stream;
  auto y_hat = ibn_forward(model, binding, window.x, mask, opts);
  auto target = tape.constant(window.y);
  auto loss = ad::mean(ad::abs(ad::sub(y_hat, target)));
  tape.backward(loss);

  SampleGradient out;
  out.loss = loss.value().item();
  out.grads.reserve(binding.params.size());
  for (std::size_t i = 0; i < binding.params.size(); ++i)
  {
    const Tensor& g = binding.params[i].grad();
    out.grads.push_back(g.empty() ? Tensor(model.params().value(i).shape()) : g);
  }
  return out;
}

Stream eval_stream(std::uint64_t eval_seed, const data::Window& window)
{
  return Stream(eval_seed).child(window.start);
}

double normalized_mae(const ForecastModel& model, const std::vector<data::Window>& windows,
                      const Mask& mask, std::uint64_t eval_seed)
{
  if (windows.empty()) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  ForwardOptions opts;
  opts.phase = Phase::eval;
  for (const auto& w : windows)
  {
    opts.stream = eval_stream(eval_seed, w);
    const Tensor y_hat = predict(model, w.x, mask, opts);
    for (std::size_t i = 0; i < y_hat.size(); ++i) total += std::abs(y_hat[i] - w.y[i]);
    count += y_hat.size();
  }
  return total / static_cast<double>(count);
}

MetricReport evaluate(const ForecastModel& model, const std::vector<data::Window>& windows,
                      const Mask& mask, const data::Scaler& scaler, std::uint64_t eval_seed)
{
  MetricAccumulator acc(model.config().n);
  ForwardOptions opts;
  opts.phase = Phase::eval;
  for (const auto& w : windows)
  {
    opts.stream = eval_stream(eval_seed, w);
    const Tensor y_hat = predict(model, w.x, mask, opts);
    acc.add(to_original(w.y, scaler), to_original(y_hat, scaler));
    acc.add_normalized(w.y, y_hat);
  }
  return acc.report();
}

namespace {

template <typename Predict>
MetricReport baseline(const std::vector<data::Window>& windows, const data::Scaler& scaler,
                      Predict predict_block)
{
  if (windows.empty()) return {};
  MetricAccumulator acc(windows.front().y.dim(0));
  for (const auto& w : windows)
  {
    const Tensor y_hat = predict_block(w);
    acc.add(to_original(w.y, scaler), to_original(y_hat, scaler));
    acc.add_normalized(w.y, y_hat);
  }
  return acc.report();
}

} // namespace

MetricReport last_value_baseline(const std::vector<data::Window>& windows,
                                 const data::Scaler& scaler)
{
  return baseline(windows, scaler, [](const data::Window& w) {
    const std::size_t n = w.y.dim(0), l = w.y.dim(1), h = w.x.dim(1), c = w.x.dim(2);
    Tensor y_hat({n, l});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < l; ++k) y_hat.at(i, k) = w.x[(i * h + h - 1) * c];
    return y_hat;
  });
}

MetricReport train_mean_baseline(const std::vector<data::Window>& windows,
                                 const data::Scaler& scaler)
{
  // Zero on the normalized scale is the training mean in original units.
  return baseline(windows, scaler, [](const data::Window& w) { return Tensor(w.y.shape()); });
}

void train(ForecastModel& model, const data::Datasets& data, const TrainConfig& config,
           TrainState& state, const TrainOptions& options)
{
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("no training windows");
  if (state.finished) return;
  using clock = std::chrono::steady_clock;

  const Stream root(config.seed);
  const std::size_t stride = config.train_stride;
  const auto& eval_windows = data.val.empty() ? data.train : data.val;

  while (state.epoch < config.max_epochs)
  {
    if (options.pause_after && state.epoch >= *options.pause_after) return;
    const auto started = clock::now();
    const std::size_t epoch = state.epoch;
    const Stream epoch_stream = root.child(epoch);

    std::vector<std::size_t> order;
    for (std::size_t i = epoch % stride; i < data.train.size(); i += stride) order.push_back(i);
    const Stream shuffle = epoch_stream.child(kShuffleTag);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.bits(i) % i)]);

    const Stream dropout = epoch_stream.child(kDropoutTag);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size)
    {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::vector<Tensor> grads;
      double batch_loss = 0.0;
      for (std::size_t k = b; k < e; ++k)
      {
        const std::size_t idx = order[k];
        auto sg = sample_gradient(model, data.train[idx], data.mask, dropout.child(idx));
        if (!std::isfinite(sg.loss))
        {
          auto culprit = first_non_finite(model);
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                               ", window " + std::to_string(data.train[idx].start) + "; " +
                               (culprit.empty() ? "first non-finite value: model output"
                                                : "first non-finite value: " + culprit));
        }
        batch_loss += sg.loss;
        if (grads.empty())
          grads = std::move(sg.grads);
        else
          for (std::size_t p = 0; p < grads.size(); ++p)
          {
            auto dst = grads[p].data();
            auto src = sg.grads[p].data();
            for (std::size_t q = 0; q < dst.size(); ++q) dst[q] += src[q];
          }
      }
      const double inv = 1.0 / static_cast<double>(e - b);
      for (auto& g : grads)
        for (double& v : g.data()) v *= inv;
      for (std::size_t p = 0; p < grads.size(); ++p)
        for (double v : grads[p].data())
          if (!std::isfinite(v))
            throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch + 1) +
                                 "; first non-finite value: gradient of " +
                                 model.params().name(p));
      adam_step(model.params(), std::move(grads), state.adam, config.adam);
      loss_sum += batch_loss;
      if (auto culprit = first_non_finite(model); !culprit.empty())
        throw NumericalError("non-finite update at epoch " + std::to_string(epoch + 1) +
                             "; first non-finite value: " + culprit);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_mae = loss_sum / static_cast<double>(order.size());
    rec.val_mae = normalized_mae(model, eval_windows, data.mask, config.eval_seed);
    rec.seconds = std::chrono::duration<double>(clock::now() - started).count();
    if (!std::isfinite(rec.val_mae))
      throw NumericalError("non-finite validation MAE at epoch " + std::to_string(rec.epoch));
    state.history.push_back(rec);
    ++state.epoch;

    if (!state.best || rec.val_mae < state.best_val)
    {
      state.best = model.params();
      state.best_val = rec.val_mae;
      state.best_epoch = rec.epoch;
      state.stale_epochs = 0;
    }
    else
      ++state.stale_epochs;
    if (options.on_epoch) options.on_epoch(rec);
    if (state.stale_epochs >= config.patience) break;
  }

  if (state.best) model.params() = *state.best;
  state.finished = true;
}

TrainState train(ForecastModel& model, const data::Datasets& data, const TrainConfig& config)
{
  TrainState state;
  train(model, data, config, state);
  return state;
}

std::vector<Variant> ablation_variants(const ModelConfig& base)
{
  ModelConfig full = base;
  full.uai_to_ia = full.ggcn_to_agcn = full.bi_to_uni = false;
  std::vector<Variant> out{{"IBN", full}};
  ModelConfig v = full;
  v.uai_to_ia = true;
  out.push_back({"UAI->IA", v});
  v = full;
  v.ggcn_to_agcn = true;
  out.push_back({"GGCN->AGCN", v});
  v = full;
  v.bi_to_uni = true;
  out.push_back({"Bi-RU->Uni-RU", v});
  return out;
}

std::vector<VariantResult> ablate(const ModelConfig& base, const Tensor& a_pre,
                                  const data::Datasets& data, const TrainConfig& config,
                                  std::uint64_t init_seed)
{
  std::vector<VariantResult> out;
  for (const auto& variant : ablation_variants(base))
  {
    ForecastModel model(variant.config, a_pre, init_seed);
    const auto state = train(model, data, config);
    VariantResult r;
    r.name = variant.name;
    r.parameters = model.params().scalar_count();
    r.epochs = state.epoch;
    r.test = evaluate(model, data.test, data.mask, data.scaler, config.eval_seed);
    out.push_back(std::move(r));
  }
  return out;
}

std::string ablation_csv_header(const std::vector<VariantResult>& results)
{
  std::string s = "dataset";
  for (const auto& r : results)
    for (const char* m : {"RMSE", "MAPE", "MAE"}) s += "," + r.name + "_" + m;
  return s;
}

std::string ablation_csv_row(const std::string& dataset, const std::vector<VariantResult>& results)
{
  std::string s = dataset;
  for (const auto& r : results)
  {
    s += "," + data::format_real(r.test.rmse);
    s += "," + (r.test.mape ? data::format_real(*r.test.mape) : std::string("NA"));
    s += "," + data::format_real(r.test.mae);
  }
  return s;
}

} // namespace ibn::train
