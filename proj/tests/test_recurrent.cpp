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
#include <numeric>

#include "ibn/graph.hpp"
#include "ibn/recurrent.hpp"
#include "support.hpp"

using namespace ibn;
using ibn::testing::random_tensor;

namespace {

ModelConfig small_config(std::size_t n = 4, std::size_t h = 5, std::size_t l = 3, std::size_t d = 4)
{
  ModelConfig cfg;
  cfg.n = n;
  cfg.h = h;
  cfg.l = l;
  cfg.d = d;
  cfg.embed_dim = 3;
  return cfg;
}

Tensor random_graph(std::size_t n, std::mt19937_64& rng)
{
  return graph::build_predefined_from_coords(random_tensor({n, 2}, rng, 0.0, 1.0), 0.7);
}

// Random biases too, so no parameter sits at an initialization special case.
void randomize(ForecastModel& model, std::mt19937_64& rng, double spread = 0.5)
{
  for (std::size_t i = 0; i < model.params().size(); ++i)
  {
    Tensor& v = model.params().value(i);
    v = random_tensor(v.shape(), rng, -spread, spread);
  }
}

Tensor random_window(const ModelConfig& cfg, const Mask& mask, std::mt19937_64& rng)
{
  Tensor x = random_tensor({cfg.n, cfg.h, cfg.c}, rng);
  for (std::size_t i = 0; i < cfg.n; ++i)
    if (!mask[i])
      for (std::size_t e = 0; e < cfg.h * cfg.c; ++e) x[i * cfg.h * cfg.c + e] = 0.0;
  return x;
}

ForwardOptions options(std::uint64_t seed)
{
  ForwardOptions o;
  o.stream = Stream(seed);
  return o;
}

} // namespace

TEST_CASE("cell: forced forget gate keeps the memory, forced reset gate returns the reconstruction")
{
  std::mt19937_64 rng(1);
  const auto cfg = small_config();
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  randomize(model, rng);
  ad::Tape tape;
  auto binding = bind(model, tape);
  const Mask mask{true, false, true, false};
  auto x = tape.constant(random_tensor({cfg.n, 1}, rng));
  auto c_prev = tape.constant(random_tensor({cfg.n, cfg.d}, rng));

  auto ctx = make_cell_context(model, binding, Phase::train);
  ctx.hooks.force_forget = 1.0;
  const auto kept = ibn_cell_step(ctx, model.layer1_fwd(), x, mask, c_prev, Stream(4));
  CHECK(kept.c.value() == c_prev.value());

  ctx = make_cell_context(model, binding, Phase::train);
  ctx.hooks.force_reset = 0.0;
  StepTrace trace;
  const auto reset = ibn_cell_step(ctx, model.layer1_fwd(), x, mask, c_prev, Stream(4), &trace);
  CHECK(reset.h.value() == trace.x_hat);
}

TEST_CASE("cell: zero parameters, input and memory are a fixed point")
{
  std::mt19937_64 rng(2);
  const auto cfg = small_config();
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  for (std::size_t i = 0; i < model.params().size(); ++i) model.params().value(i).fill(0.0);
  ad::Tape tape;
  auto binding = bind(model, tape);
  const auto ctx = make_cell_context(model, binding, Phase::train);
  const auto s = ibn_cell_step(ctx, model.layer1_fwd(), tape.constant(Tensor({cfg.n, 1})),
                               Mask(cfg.n, true), tape.constant(Tensor({cfg.n, cfg.d})), Stream(1));
  CHECK(s.h.value() == Tensor({cfg.n, cfg.d}));
  CHECK(s.c.value() == Tensor({cfg.n, cfg.d}));
}

TEST_CASE("cell: width mismatch is rejected")
{
  std::mt19937_64 rng(3);
  const auto cfg = small_config();
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  ad::Tape tape;
  auto binding = bind(model, tape);
  const auto ctx = make_cell_context(model, binding, Phase::train);
  CHECK_THROWS_AS(ibn_cell_step(ctx, model.layer2(), tape.constant(Tensor({cfg.n, cfg.d})),
                                Mask(cfg.n, true), tape.constant(Tensor({cfg.n, cfg.d})), Stream(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_ru(ctx, model.layer2(), {}, Mask(cfg.n, true), Direction::forward, Stream(1)),
                  std::invalid_argument);
}

TEST_CASE("recurrent unit: a single step is the same in both directions")
{
  std::mt19937_64 rng(4);
  const auto cfg = small_config();
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  ad::Tape tape;
  auto binding = bind(model, tape);
  const auto ctx = make_cell_context(model, binding, Phase::train);
  const std::vector<ad::Var> seq{tape.constant(random_tensor({cfg.n, 1}, rng))};
  const Mask mask{true, true, false, true};
  const auto f = run_ru(ctx, model.layer1_fwd(), seq, mask, Direction::forward, Stream(9));
  const auto b = run_ru(ctx, model.layer1_fwd(), seq, mask, Direction::backward, Stream(9));
  REQUIRE(f.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(f[0].value() == b[0].value());
}

TEST_CASE("recurrent unit: backward run on reversed input is the reversed forward run")
{
  std::mt19937_64 rng(5);
  const auto cfg = small_config(4, 3);
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  randomize(model, rng);
  ad::Tape tape;
  auto binding = bind(model, tape);
  const auto ctx = make_cell_context(model, binding, Phase::train);
  const Mask mask{true, false, true, true};
  std::vector<ad::Var> seq, reversed;
  for (std::size_t t = 0; t < 3; ++t) seq.push_back(tape.constant(random_tensor({cfg.n, 1}, rng)));
  reversed.assign(seq.rbegin(), seq.rend());

  const auto f = run_ru(ctx, model.layer1_fwd(), seq, mask, Direction::forward, Stream(11));
  const auto b = run_ru(ctx, model.layer1_fwd(), reversed, mask, Direction::backward, Stream(11));
  for (std::size_t t = 0; t < 3; ++t) CHECK(b[t].value() == f[2 - t].value());
}

TEST_CASE("recurrent unit: later hidden states remember earlier inputs")
{
  std::mt19937_64 rng(6);
  const auto cfg = small_config(4, 2);
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  randomize(model, rng);
  const Mask mask(cfg.n, true);
  const Tensor x2 = random_tensor({cfg.n, 1}, rng);

  auto second_hidden = [&](const Tensor& x1) {
    ad::Tape tape;
    auto binding = bind(model, tape);
    const auto ctx = make_cell_context(model, binding, Phase::train);
    const std::vector<ad::Var> seq{tape.constant(x1), tape.constant(x2)};
    return run_ru(ctx, model.layer1_fwd(), seq, mask, Direction::forward, Stream(2))[1].value();
  };
  const Tensor a = second_hidden(Tensor({cfg.n, 1}));
  const Tensor b = second_hidden(random_tensor({cfg.n, 1}, rng));
  double diff = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) diff = std::max(diff, std::abs(a[e] - b[e]));
  CHECK(diff > 1e-6);
}

TEST_CASE("decoder: zero kernels give the bias")
{
  std::mt19937_64 rng(7);
  auto cfg = small_config(3, 4, 1);
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  const auto& dec = model.decoder();
  model.params()[dec.conv1_w].fill(0.0);
  model.params()[dec.conv2_w].fill(0.0);
  model.params()[dec.conv2_b].fill(0.75);
  const Tensor y = predict(model, random_window(cfg, Mask(cfg.n, true), rng), Mask(cfg.n, true), options(1));
  CHECK(y == Tensor({cfg.n, 1}, 0.75));
  CHECK(predict(ForecastModel(small_config(3, 4, 5), random_graph(3, rng), 1),
                random_window(small_config(3, 4, 5), Mask(3, true), rng), Mask(3, true), options(1))
          .shape() == Shape{3, 5});
}

TEST_CASE("decoder: identity second convolution and constant inputs")
{
  std::mt19937_64 rng(8);
  auto cfg = small_config(3, 4, 2);
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  randomize(model, rng);
  const auto& dec = model.decoder();
  const std::size_t w = dec.channel_width;
  ad::Tape tape;
  auto binding = bind(model, tape);
  auto h1 = tape.constant(random_tensor({cfg.n, w}, rng));
  auto h2 = tape.constant(random_tensor({cfg.n, w}, rng));

  // conv2 as identity: the output is the activated first convolution.
  Tensor eye({2, 2, 1, 1});
  eye[0] = eye[3] = 1.0;
  binding.params[dec.conv2_w.index] = tape.constant(eye);
  binding.params[dec.conv2_b.index] = tape.constant(Tensor({2}));
  const Tensor y = decode(binding, dec, h1, h2).value();
  const Tensor k1 = model.params()[dec.conv1_w];
  const Tensor b1 = model.params()[dec.conv1_b];
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t o = 0; o < 2; ++o)
    {
      double z = b1[o];
      for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t j = 0; j < w; ++j)
          z += k1[(o * 2 + ch) * w + j] * (ch == 0 ? h1.value() : h2.value()).at(i, j);
      const double gelu = 0.5 * z * std::erfc(-z / std::sqrt(2.0));
      CHECK(y.at(i, o) == doctest::Approx(gelu).epsilon(1e-13));
    }

  // Zero inputs, zero first bias, second bias c.
  binding.params[dec.conv1_b.index] = tape.constant(Tensor({2}));
  binding.params[dec.conv2_b.index] = tape.constant(Tensor::matrix(1, 2, {0.3, -1.2}).reshaped({2}));
  auto zero = tape.constant(Tensor({cfg.n, w}));
  const Tensor c = decode(binding, dec, zero, zero).value();
  for (std::size_t i = 0; i < cfg.n; ++i)
  {
    CHECK(c.at(i, 0) == 0.3);
    CHECK(c.at(i, 1) == -1.2);
  }

  CHECK_THROWS_AS(decode(binding, dec, zero, tape.constant(Tensor({cfg.n, w + 1}))), std::invalid_argument);
}

TEST_CASE("decoder: hand-computed two-node example")
{
  std::mt19937_64 rng(9);
  auto cfg = small_config(2, 3, 1, 1);
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  const auto& dec = model.decoder();
  REQUIRE(dec.channel_width == 2);
  ad::Tape tape;
  auto binding = bind(model, tape);
  binding.params[dec.conv1_w.index] = tape.constant(Tensor({1, 2, 1, 2}, {1.0, -2.0, 0.5, 3.0}));
  binding.params[dec.conv1_b.index] = tape.constant(Tensor({1}, {0.25}));
  binding.params[dec.conv2_w.index] = tape.constant(Tensor({1, 1, 1, 1}, {2.0}));
  binding.params[dec.conv2_b.index] = tape.constant(Tensor({1}, {-1.0}));
  auto h1 = tape.constant(Tensor::matrix(2, 2, {1.0, 0.5, -1.0, 2.0}));
  auto h2 = tape.constant(Tensor::matrix(2, 2, {0.0, 1.0, 2.0, -0.5}));
  const Tensor y = decode(binding, dec, h1, h2).value();
  // row 0: 1 - 1 + 0 + 3 + 0.25 = 3.25; row 1: -1 - 4 + 1 - 1.5 + 0.25 = -5.25
  auto gelu = [](double z) { return 0.5 * z * std::erfc(-z / std::sqrt(2.0)); };
  CHECK(y.at(0, 0) == doctest::Approx(2.0 * gelu(3.25) - 1.0).epsilon(1e-14));
  CHECK(y.at(1, 0) == doctest::Approx(2.0 * gelu(-5.25) - 1.0).epsilon(1e-14));
}

TEST_CASE("forward: fixed seed is deterministic, other seeds differ")
{
  std::mt19937_64 rng(10);
  const auto cfg = small_config();
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  const Mask mask{true, false, true, true};
  const Tensor x = random_window(cfg, mask, rng);
  CHECK(predict(model, x, mask, options(5)) == predict(model, x, mask, options(5)));
  CHECK_FALSE(predict(model, x, mask, options(5)) == predict(model, x, mask, options(6)));
  CHECK_THROWS_AS(predict(model, Tensor({cfg.n, cfg.h + 1, 1}), mask, options(5)), std::invalid_argument);
  CHECK_THROWS_AS(predict(model, x, Mask(cfg.n + 1, true), options(5)), std::invalid_argument);
}

TEST_CASE("forward: stored values of missing variables never reach the output")
{
  std::mt19937_64 rng(11);
  const auto cfg = small_config();
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  randomize(model, rng);
  const Mask mask{true, false, true, false};
  const Tensor x = random_window(cfg, mask, rng);
  const Tensor base = predict(model, x, mask, options(3));
  for (int trial = 0; trial < 5; ++trial)
  {
    Tensor poked = x;
    for (std::size_t i : {1u, 3u})
      for (std::size_t t = 0; t < cfg.h; ++t) poked[i * cfg.h + t] = random_tensor({1}, rng, -50, 50)[0];
    CHECK(predict(model, poked, mask, options(3)) == base);
  }
}

TEST_CASE("forward: permuting variables, graphs and embeddings permutes the output")
{
  std::mt19937_64 rng(12);
  auto cfg = small_config(5, 4, 2);
  cfg.dropout = 0.0;
  for (bool agcn : {false, true})
  {
    cfg.ggcn_to_agcn = agcn;
    const Tensor a_pre = random_graph(cfg.n, rng);
    ForecastModel model(cfg, a_pre, 3);
    randomize(model, rng);
    const Mask mask{true, false, true, true, false};
    const Tensor x = random_window(cfg, mask, rng);
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2}; // new row k holds old row perm[k]

    Tensor a_perm({cfg.n, cfg.n});
    for (std::size_t i = 0; i < cfg.n; ++i)
      for (std::size_t j = 0; j < cfg.n; ++j) a_perm.at(i, j) = a_pre.at(perm[i], perm[j]);
    ForecastModel permuted(cfg, a_perm, 3);
    permuted.params() = model.params();
    for (std::size_t p = 0; p < model.params().size(); ++p)
    {
      const auto& name = model.params().name(p);
      const bool per_node = name.ends_with(".ia.embed") || name.ends_with(".agcn.e1") ||
                            name.ends_with(".agcn.e2");
      if (!per_node) continue;
      const Tensor& src = model.params().value(p);
      Tensor& dst = permuted.params().value(p);
      for (std::size_t k = 0; k < cfg.n; ++k)
        for (std::size_t c = 0; c < src.cols(); ++c) dst.at(k, c) = src.at(perm[k], c);
    }
    Tensor x_perm(x.shape());
    Mask mask_perm(cfg.n);
    for (std::size_t k = 0; k < cfg.n; ++k)
    {
      mask_perm[k] = mask[perm[k]];
      for (std::size_t t = 0; t < cfg.h; ++t) x_perm[k * cfg.h + t] = x[perm[k] * cfg.h + t];
    }

    const Tensor y = predict(model, x, mask, options(1));
    const Tensor yp = predict(permuted, x_perm, mask_perm, options(1));
    for (std::size_t k = 0; k < cfg.n; ++k)
      for (std::size_t o = 0; o < cfg.l; ++o)
        CHECK(yp.at(k, o) == doctest::Approx(y.at(perm[k], o)).epsilon(1e-12));
  }
}

TEST_CASE("forward: every parameter tensor receives gradient")
{
  std::mt19937_64 rng(13);
  for (int variant = 0; variant < 2; ++variant)
  {
    auto cfg = small_config();
    cfg.ggcn_to_agcn = variant == 1;
    ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
    randomize(model, rng);
    const Mask mask{true, false, true, false};
    const Tensor x = random_window(cfg, mask, rng);
    const Tensor y = random_tensor({cfg.n, cfg.l}, rng);

    ad::Tape tape;
    auto binding = bind(model, tape);
    auto pred = ibn_forward(model, binding, x, mask, options(4));
    auto loss = ad::mean(ad::abs(ad::sub(pred, tape.constant(y))));
    const auto grads = tape.gradients(loss, binding.params);
    for (std::size_t p = 0; p < binding.params.size(); ++p)
    {
      const Tensor& g = grads.at(binding.params[p].id());
      double norm = 0.0;
      for (double v : g.data()) norm += v * v;
      INFO(model.params().name(p));
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("forward: uni-directional variant has fewer parameters and runs")
{
  std::mt19937_64 rng(14);
  auto cfg = small_config();
  const Tensor a = random_graph(cfg.n, rng);
  const ForecastModel bi(cfg, a, 1);
  cfg.bi_to_uni = true;
  const ForecastModel uni(cfg, a, 1);
  CHECK(uni.params().scalar_count() < bi.params().scalar_count());
  CHECK(uni.decoder().channel_width == cfg.d);
  CHECK(predict(uni, random_window(cfg, Mask(cfg.n, true), rng), Mask(cfg.n, true), options(1)).shape() ==
        Shape{cfg.n, cfg.l});
}

TEST_CASE("forward: end-to-end gradient of the MAE loss matches finite differences")
{
  std::mt19937_64 rng(15);
  const auto cfg = small_config(3, 3, 2, 3);
  ForecastModel model(cfg, random_graph(cfg.n, rng), 3);
  randomize(model, rng);
  const Mask mask{true, false, true};
  const Tensor x = random_window(cfg, mask, rng);
  const Tensor y = random_tensor({cfg.n, cfg.l}, rng);

  auto f = [&](ad::Tape& tape, const std::vector<ad::Var>& params) {
    Binding binding{&tape, params, tape.constant(model.a_pre())};
    auto pred = ibn_forward(model, binding, x, mask, options(21));
    return ad::mean(ad::abs(ad::sub(pred, tape.constant(y))));
  };
  std::vector<Tensor> values;
  for (std::size_t p = 0; p < model.params().size(); ++p) values.push_back(model.params().value(p));
  const auto r = ibn::testing::check_gradients(f, values);
  INFO(r.worst);
  CHECK(r.max_rel < 1e-4);
}
