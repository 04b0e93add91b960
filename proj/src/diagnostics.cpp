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

#include "ibn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ibn/train.hpp"

namespace ibn::diagnostics {

std::vector<double> average_ranks(std::span<const double> values)
{
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;)
  {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1); // mean of positions i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size()) throw std::invalid_argument("spearman: columns differ in length");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i)
  {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

UncertaintyReport uncertainty_diagnostics(const ForecastModel& model,
                                          const std::vector<data::Window>& windows,
                                          const Mask& mask, std::uint64_t eval_seed)
{
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) missing.push_back(i);
  if (missing.empty()) throw std::invalid_argument("diagnostics require masked variables");

  const auto& cfg = model.config();
  const auto& cell = model.layer1_fwd();
  const auto& ps = model.params();
  const Tensor& in_w = ps[cell.in_w];
  const Tensor& in_b = ps[cell.in_b];
  const Tensor& w = ps[cell.uai_w];
  const Tensor& b = ps[cell.uai_b];
  const std::size_t d = cell.width;

  UncertaintyReport report;
  ForwardOptions opts;
  opts.phase = Phase::eval;
  std::vector<double> proj(d);
  for (const auto& win : windows)
  {
    ForwardTrace trace;
    opts.stream = train::eval_stream(eval_seed, win);
    opts.trace = &trace;
    predict(model, win.x, mask, opts);

    for (std::size_t i : missing)
    {
      double err = 0.0, sig = 0.0;
      for (std::size_t t = 0; t < cfg.h; ++t)
      {
        const auto& step = trace.layer1[t];
        for (std::size_t k = 0; k < d; ++k)
        {
          double v = in_b[k];
          for (std::size_t ch = 0; ch < cfg.c; ++ch)
            v += win.x_true[(i * cfg.h + t) * cfg.c + ch] * in_w.at(ch, k);
          proj[k] = v;
        }
        for (std::size_t k = 0; k < d; ++k)
        {
          double target = b[k];
          for (std::size_t q = 0; q < d; ++q) target += proj[q] * w.at(q, k);
          err += std::abs(step.x_hat.at(i, k) - target);
          sig += step.sigma.at(i, k);
        }
      }
      const double denom = static_cast<double>(cfg.h * d);
      report.rows.push_back({i, win.start, err / denom, sig / denom});
    }
  }

  std::vector<double> errs, sigmas;
  for (const auto& r : report.rows)
  {
    errs.push_back(r.reconstruction_error);
    sigmas.push_back(r.sigma);
  }
  report.spearman = spearman(errs, sigmas);
  return report;
}

void write_uncertainty_csv(const std::filesystem::path& path, const UncertaintyReport& report)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "variable,window,reconstruction_error,sigma\n";
  for (const auto& r : report.rows)
    out << r.variable << ',' << r.window << ',' << data::format_real(r.reconstruction_error) << ','
        << data::format_real(r.sigma) << '\n';
}

AdjacencyExport export_adjacency(const ForecastModel& model, const data::Window& window,
                                 const Mask& mask, std::uint64_t eval_seed)
{
  ForwardTrace trace;
  ForwardOptions opts;
  opts.phase = Phase::eval;
  opts.stream = train::eval_stream(eval_seed, window);
  opts.trace = &trace;
  predict(model, window.x, mask, opts);

  const std::size_t n = model.config().n;
  AdjacencyExport out{model.a_pre(), Tensor({n, n})};
  for (const auto& step : trace.layer1)
    for (std::size_t e = 0; e < out.a_dyn.size(); ++e) out.a_dyn[e] += step.a_dyn[e];
  const double inv = 1.0 / static_cast<double>(trace.layer1.size());
  for (double& v : out.a_dyn.data()) v *= inv;
  return out;
}

PairContrast pair_contrast(const Tensor& a, const Tensor& truth)
{
  if (a.shape() != truth.shape() || a.rank() != 2 || a.dim(0) != a.dim(1))
    throw std::invalid_argument("pair_contrast needs two square matrices of equal shape");
  double con = 0.0, unc = 0.0;
  std::size_t nc = 0, nu = 0;
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j)
    {
      if (i == j) continue;
      if (truth.at(i, j) > 0.0)
      {
        con += a.at(i, j);
        ++nc;
      }
      else
      {
        unc += a.at(i, j);
        ++nu;
      }
    }
  return {nc ? con / static_cast<double>(nc) : 0.0, nu ? unc / static_cast<double>(nu) : 0.0};
}

} // namespace ibn::diagnostics
