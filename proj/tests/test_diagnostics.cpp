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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "ibn/config.hpp"
#include "ibn/diagnostics.hpp"
#include "ibn/experiment.hpp"
#include "support.hpp"

using namespace ibn;

namespace {

config::RunConfig small_config(double dropout)
{
  auto c = config::from_json(config::default_json());
  c.data.synthetic.n = 5;
  c.data.synthetic.t = 120;
  c.data.history = 6;
  c.data.horizon = 2;
  c.model.h = 6;
  c.model.l = 2;
  c.model.d = 4;
  c.model.embed_dim = 4;
  c.model.dropout = dropout;
  c.model.samples = 4;
  return c;
}

// Plain Pearson on precomputed ranks, for an independent check.
double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_CASE("average ranks share ties")
{
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0, 3.0};
  const auto r = diagnostics::average_ranks(v);
  CHECK(r == std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0});
}

TEST_CASE("spearman on known orderings")
{
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> up{10, 20, 30, 40, 50};
  const std::vector<double> down{5, 4, 3, 2, 1};
  CHECK(*diagnostics::spearman(a, up) == doctest::Approx(1.0));
  CHECK(*diagnostics::spearman(a, down) == doctest::Approx(-1.0));
  // Monotone transforms do not change it.
  const std::vector<double> cubed{1, 8, 27, 64, 125};
  CHECK(*diagnostics::spearman(a, cubed) == doctest::Approx(1.0));

  CHECK_FALSE(diagnostics::spearman(std::vector<double>{1.0}, std::vector<double>{2.0}));
  CHECK_FALSE(diagnostics::spearman(a, std::vector<double>(5, 3.0)));
  CHECK_THROWS_AS(diagnostics::spearman(a, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("spearman matches pearson of average ranks on random data with ties")
{
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, 6);
  for (int trial = 0; trial < 50; ++trial)
  {
    std::vector<double> a(12), b(12);
    for (std::size_t i = 0; i < a.size(); ++i)
    {
      a[i] = pick(rng);
      b[i] = pick(rng) + 0.5 * a[i];
    }
    const auto rho = diagnostics::spearman(a, b);
    if (!rho) continue;
    const double oracle = pearson(diagnostics::average_ranks(a), diagnostics::average_ranks(b));
    CHECK(*rho == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(*rho >= -1.0 - 1e-12);
    CHECK(*rho <= 1.0 + 1e-12);
  }
}

TEST_CASE("pair contrast averages connected and unconnected off-diagonal weights")
{
  const Tensor a({3, 3}, {9, 0.2, 0.4, 0.6, 9, 0.8, 0.1, 0.3, 9});
  const Tensor truth({3, 3}, {1, 1, 0, 1, 1, 0, 0, 0, 1});
  const auto c = diagnostics::pair_contrast(a, truth);
  CHECK(c.connected == doctest::Approx((0.2 + 0.6) / 2));
  CHECK(c.unconnected == doctest::Approx((0.4 + 0.8 + 0.1 + 0.3) / 4));
}

TEST_CASE("uncertainty diagnostics on an untrained model")
{
  const auto cfg = small_config(0.1);
  const auto ex = load_experiment(cfg);
  const ForecastModel model(model_config(cfg, ex.series.variables()), ex.a_pre, 3);
  const auto& windows = ex.datasets.test;
  REQUIRE_FALSE(windows.empty());

  std::size_t masked = 0;
  for (bool m : ex.datasets.mask) masked += m ? 0 : 1;
  REQUIRE(masked > 0);

  const auto report = diagnostics::uncertainty_diagnostics(model, windows, ex.datasets.mask, 9);
  CHECK(report.rows.size() == masked * windows.size());
  for (const auto& r : report.rows)
  {
    CHECK_FALSE(ex.datasets.mask[r.variable]);
    CHECK(std::isfinite(r.reconstruction_error));
    CHECK(r.sigma >= 0.0);
  }
  const auto again = diagnostics::uncertainty_diagnostics(model, windows, ex.datasets.mask, 9);
  CHECK(again.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i)
  {
    CHECK(again.rows[i].sigma == report.rows[i].sigma);
    CHECK(again.rows[i].reconstruction_error == report.rows[i].reconstruction_error);
  }

  const auto dir = testing::scratch_dir("diagnostics");
  diagnostics::write_uncertainty_csv(dir / "u.csv", report);
  std::ifstream in(dir / "u.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "variable,window,reconstruction_error,sigma");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == report.rows.size());

  Mask all(ex.datasets.mask.size(), true);
  CHECK_THROWS_WITH_AS(diagnostics::uncertainty_diagnostics(model, windows, all, 9),
                       "diagnostics require masked variables", std::invalid_argument);
}

TEST_CASE("zero dropout gives zero sigma and no rank correlation")
{
  const auto cfg = small_config(0.0);
  const auto ex = load_experiment(cfg);
  const ForecastModel model(model_config(cfg, ex.series.variables()), ex.a_pre, 3);
  const auto report = diagnostics::uncertainty_diagnostics(model, ex.datasets.val, ex.datasets.mask, 9);
  REQUIRE_FALSE(report.rows.empty());
  for (const auto& r : report.rows) CHECK(r.sigma == 0.0);
  CHECK_FALSE(report.spearman);
}

TEST_CASE("adjacency export keeps the predefined graph and a row-stochastic dynamic graph")
{
  const auto cfg = small_config(0.1);
  const auto ex = load_experiment(cfg);
  const ForecastModel model(model_config(cfg, ex.series.variables()), ex.a_pre, 3);
  const auto first = diagnostics::export_adjacency(model, ex.datasets.test.front(), ex.datasets.mask, 9);
  const auto last = diagnostics::export_adjacency(model, ex.datasets.test.back(), ex.datasets.mask, 9);
  CHECK(first.a_pre == ex.a_pre);
  CHECK(last.a_pre == first.a_pre);
  CHECK(testing::row_sum_error(first.a_dyn) < 1e-12);
  CHECK(testing::row_sum_error(last.a_dyn) < 1e-12);
  for (double v : first.a_dyn.data()) CHECK(v >= 0.0);
}
