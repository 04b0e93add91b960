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

#include "ibn/graph.hpp"
#include "support.hpp"

using namespace ibn;
using ibn::testing::random_tensor;
using ibn::testing::row_sum_error;

TEST_CASE("pairwise distances: identical rows, unit vectors, symmetry")
{
  CHECK(graph::pairwise_euclidean(Tensor({3, 2}, 0.7)) == Tensor({3, 3}));

  const Tensor d = graph::pairwise_euclidean(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  CHECK(d.at(0, 1) == doctest::Approx(1.41421).epsilon(1e-5));
  CHECK(d.at(0, 0) == 0.0);

  std::mt19937_64 rng(1);
  const Tensor r = graph::pairwise_euclidean(random_tensor({6, 4}, rng));
  for (std::size_t i = 0; i < 6; ++i)
  {
    CHECK(r.at(i, i) == 0.0);
    for (std::size_t j = 0; j < 6; ++j) CHECK(r.at(i, j) == r.at(j, i));
  }

  ad::Tape tape;
  const Tensor x = random_tensor({5, 3}, rng);
  const Tensor dv = graph::pairwise_euclidean(tape.constant(x)).value();
  const Tensor dt = graph::pairwise_euclidean(x);
  for (std::size_t e = 0; e < dv.size(); ++e) CHECK(dv[e] == doctest::Approx(dt[e]).epsilon(1e-12));
}

TEST_CASE("gaussian adjacency: kernel values and row softmax")
{
  ad::Tape tape;
  // Two nodes at zero distance: kernel 1 everywhere, plus the self-loop.
  const Tensor a = graph::gaussian_adjacency(tape.constant(Tensor({2, 2})), 4.0).value();
  CHECK(a.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(a.at(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(a.at(1, 0) == doctest::Approx(0.2689).epsilon(1e-4));

  // D^2 = 2 gamma gives a kernel of 1/e before self-loop and softmax: the
  // softmax logits are then [2, e^-1] for the first row.
  const double gamma = 3.0;
  const double dist = std::sqrt(2.0 * gamma);
  const Tensor b =
    graph::gaussian_adjacency(tape.constant(Tensor::matrix(2, 2, {0, dist, dist, 0})), gamma).value();
  const double e0 = std::exp(2.0), e1 = std::exp(std::exp(-1.0));
  CHECK(b.at(0, 1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(graph::gaussian_adjacency(tape.constant(Tensor({2, 2})), 0.0),
                       "bandwidth must be positive", std::invalid_argument);
  CHECK_THROWS_WITH_AS(graph::gaussian_adjacency(tape.constant(Tensor({2, 2})), -1.0),
                       "bandwidth must be positive", std::invalid_argument);
}

TEST_CASE("gaussian adjacency is row-stochastic and strictly positive on random features")
{
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial)
  {
    ad::Tape tape;
    const Tensor x = random_tensor({7, 4}, rng);
    const auto pair = graph::make_graph_pair(tape.constant(Tensor::identity(7)), tape.constant(x));
    CHECK(pair.gamma == 4.0);
    CHECK(row_sum_error(pair.a_gau.value()) < 1e-6);
    for (double v : pair.a_gau.value().data()) CHECK(v > 0.0);
  }
}

TEST_CASE("gaussian adjacency stays finite and row-stochastic for large feature magnitudes")
{
  std::mt19937_64 rng(4);
  for (double s : {1.0, 10.0, 100.0, 1000.0})
  {
    ad::Tape tape;
    const Tensor x = random_tensor({6, 3}, rng, -s, s);
    const Tensor a = graph::make_graph_pair(tape.constant(Tensor::identity(6)), tape.constant(x)).a_gau.value();
    for (double v : a.data()) CHECK(std::isfinite(v));
    CHECK(row_sum_error(a) < 1e-6);
  }
}

TEST_CASE("kernel decreases strictly with distance")
{
  const double gamma = 2.0;
  double prev = 2.0;
  for (double d : {0.0, 0.5, 1.0, 2.0, 3.0})
  {
    ad::Tape tape;
    const Tensor a =
      graph::gaussian_adjacency(tape.constant(Tensor::matrix(2, 2, {0, d, d, 0})), gamma).value();
    CHECK(a.at(0, 1) < prev);
    prev = a.at(0, 1);
  }
}

TEST_CASE("predefined graph")
{
  CHECK(graph::build_predefined(Tensor({1, 1}), 1.0) == Tensor::matrix(1, 1, {1.0}));
  CHECK(graph::build_predefined(Tensor::matrix(2, 2, {0, 5, 5, 0}), 1.0) == Tensor::identity(2));

  // Three collinear, equidistant nodes: 0 -- 1 -- 2 at unit spacing.
  const Tensor coords = Tensor::matrix(3, 2, {0, 0, 1, 0, 2, 0});
  const Tensor a = graph::build_predefined_from_coords(coords, 3.0);
  CHECK(row_sum_error(a) < 1e-9);
  // mean off-diagonal distance = (1 + 2 + 1) * 2 / 6 = 4/3
  const double m = 4.0 / 3.0;
  const double w1 = std::exp(-1.0 / (2 * m * m)), w2 = std::exp(-4.0 / (2 * m * m));
  CHECK(a.at(0, 1) == doctest::Approx(w1 / (1 + w1 + w2)).epsilon(1e-12));
  CHECK(a.at(1, 1) == doctest::Approx(1.0 / (1 + 2 * w1)).epsilon(1e-12));

  CHECK_THROWS_AS(graph::build_predefined(Tensor::matrix(2, 2, {0, -1, -1, 0}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("predefined graph is row-stochastic on random coordinates")
{
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial)
  {
    const Tensor coords = random_tensor({9, 2}, rng, 0.0, 1.0);
    const Tensor d = graph::distances_from_coords(coords);
    const Tensor a = graph::build_predefined(d, graph::median_offdiagonal(d));
    CHECK(row_sum_error(a) < 1e-9);
  }
}

TEST_CASE("adaptive adjacency")
{
  ad::Tape tape;
  // e1 e2^T all negative: relu gives zeros, rows are uniform.
  auto e1 = tape.constant(Tensor::matrix(3, 1, {1, 2, 3}));
  auto e2 = tape.constant(Tensor::matrix(3, 1, {-1, -1, -2}));
  const Tensor u = graph::adaptive_adjacency(e1, e2).value();
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // logits [[1,0],[0,1]]
  const Tensor a =
    graph::adaptive_adjacency(tape.constant(Tensor::identity(2)), tape.constant(Tensor::identity(2))).value();
  CHECK(a.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(a.at(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(a.at(1, 0) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(a.at(1, 1) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("ggcn special cases")
{
  std::mt19937_64 rng(21);
  const Tensor x = random_tensor({4, 3}, rng);
  ad::Tape tape;
  auto xv = tape.constant(x);
  auto pair = graph::make_graph_pair(tape.constant(Tensor::identity(4)), xv);

  // Zero weights: layer norm of zeros.
  auto zero = tape.constant(Tensor({3, 3}));
  for (double v : graph::ggcn_apply(xv, pair, {zero, zero}).value().data()) CHECK(v == 0.0);

  // Identity graphs with tied weights reduce to layer_norm(2 x W).
  const Tensor w = random_tensor({3, 3}, rng);
  auto wv = tape.constant(w);
  graph::GraphPair ident{tape.constant(Tensor::identity(4)), tape.constant(Tensor::identity(4)), 3.0, 4};
  const Tensor got = graph::ggcn_apply(xv, ident, {wv, wv}).value();
  const Tensor want = ad::layer_norm(ad::scale(ad::matmul(xv, wv), 2.0)).value();
  for (std::size_t e = 0; e < got.size(); ++e) CHECK(got[e] == doctest::Approx(want[e]).epsilon(1e-12));

  // A single node: both graphs are [[1]].
  const Tensor x1 = random_tensor({1, 3}, rng);
  auto x1v = tape.constant(x1);
  auto p1 = graph::make_graph_pair(tape.constant(Tensor::identity(1)), x1v);
  CHECK(p1.a_gau.value() == Tensor::matrix(1, 1, {1.0}));
  const Tensor w2 = random_tensor({3, 3}, rng);
  auto w2v = tape.constant(w2);
  const Tensor single = graph::ggcn_apply(x1v, p1, {wv, w2v}).value();
  const Tensor expect = ad::layer_norm(ad::add(ad::matmul(x1v, wv), ad::matmul(x1v, w2v))).value();
  for (std::size_t e = 0; e < single.size(); ++e)
    CHECK(single[e] == doctest::Approx(expect[e]).epsilon(1e-12));

  CHECK_THROWS_AS(graph::ggcn_apply(xv, pair, {tape.constant(Tensor({2, 2})), zero}), std::invalid_argument);
}

TEST_CASE("ggcn gradient with respect to features flows through both graphs")
{
  std::mt19937_64 rng(33);
  const Tensor a_pre = graph::build_predefined_from_coords(random_tensor({5, 2}, rng, 0, 1), 0.8);
  const Tensor w_pre = random_tensor({3, 3}, rng), w_gau = random_tensor({3, 3}, rng);
  // Rows of a layer-normalized output sum to zero, so weight the entries.
  const Tensor r_weights = random_tensor({5, 3}, rng);
  auto f = [&](ad::Tape& tape, const std::vector<ad::Var>& xs) {
    auto pair = graph::make_graph_pair(tape.constant(a_pre), xs[0]);
    auto y = graph::ggcn_apply(xs[0], pair, {tape.constant(w_pre), tape.constant(w_gau)});
    return ad::sum(ad::mul(y, tape.constant(r_weights)));
  };
  const auto r = ibn::testing::check_gradients(f, {random_tensor({5, 3}, rng)});
  INFO(r.worst);
  CHECK(r.max_rel < 1e-5);
}
