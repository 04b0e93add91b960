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

#include "ibn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <stdexcept>

namespace ibn::graph {

Tensor pairwise_euclidean(const Tensor& x)
{
  if (x.rank() != 2)
    throw std::invalid_argument("pairwise_euclidean expects [n,d], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
    {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k)
      {
        const double diff = x.at(i, k) - x.at(j, k);
        s += diff * diff;
      }
      out.at(i, j) = out.at(j, i) = std::sqrt(s);
    }
  return out;
}

ad::Var pairwise_euclidean(ad::Var x)
{
  return ad::sqrt(ad::pairwise_sq_dist(x));
}

ad::Var gaussian_adjacency_from_sq(ad::Var sq_dist, double gamma)
{
  if (!(gamma > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  const Shape s = sq_dist.shape();
  if (s.size() != 2 || s[0] != s[1])
    throw std::invalid_argument("distance matrix must be square, got " + to_string(s));
  auto kernel = ad::exp(ad::scale(sq_dist, -1.0 / (2.0 * gamma)));
  auto self_loop = sq_dist.tape().constant(Tensor::identity(s[0]));
  return ad::softmax(ad::add(kernel, self_loop));
}

ad::Var gaussian_adjacency(ad::Var dist, double gamma)
{
  return gaussian_adjacency_from_sq(ad::square(dist), gamma);
}

Tensor build_predefined(const Tensor& distances, double threshold)
{
  if (distances.rank() != 2 || distances.dim(0) != distances.dim(1))
    throw std::invalid_argument("distance matrix must be square, got " +
                                to_string(distances.shape()));
  const std::size_t n = distances.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
    {
      const double d = distances.at(i, j);
      if (!(d >= 0.0))
        throw std::invalid_argument("distance matrix has negative or NaN entry at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      if (i != j) total += d;
    }
  const double mean = n > 1 ? total / static_cast<double>(n * (n - 1)) : 0.0;
  const double denom = 2.0 * mean * mean;

  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i)
  {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
    {
      double w = 0.0;
      if (i == j)
        w = 1.0;
      else if (distances.at(i, j) <= threshold)
      {
        const double d = distances.at(i, j);
        w = denom > 0.0 ? std::exp(-d * d / denom) : 1.0;
      }
      a.at(i, j) = w;
      row += w;
    }
    for (std::size_t j = 0; j < n; ++j) a.at(i, j) /= row;
  }
  return a;
}

Tensor distances_from_coords(const Tensor& coords)
{
  if (coords.rank() != 2 || coords.dim(1) != 2)
    throw std::invalid_argument("coordinates must be [n,2], got " + to_string(coords.shape()));
  return pairwise_euclidean(coords);
}

double median_offdiagonal(const Tensor& distances)
{
  const std::size_t n = distances.dim(0);
  std::vector<double> off;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) off.push_back(distances.at(i, j));
  if (off.empty()) return 0.0;
  std::sort(off.begin(), off.end());
  const std::size_t m = off.size();
  return m % 2 ? off[m / 2] : 0.5 * (off[m / 2 - 1] + off[m / 2]);
}

Tensor build_predefined_from_coords(const Tensor& coords, double threshold)
{
  return build_predefined(distances_from_coords(coords), threshold);
}

ad::Var adaptive_adjacency(ad::Var e1, ad::Var e2)
{
  return ad::softmax(ad::relu(ad::matmul(e1, ad::transpose(e2))));
}

GraphPair make_graph_pair(ad::Var a_pre, ad::Var x_hat)
{
  const Shape s = x_hat.shape();
  if (s.size() != 2)
    throw std::invalid_argument("graph features must be [n,d], got " + to_string(s));
  const double gamma = static_cast<double>(s[1]);
  return {a_pre, gaussian_adjacency_from_sq(ad::pairwise_sq_dist(x_hat), gamma), gamma, s[0]};
}

Propagated propagate(ad::Var x_hat, const GraphPair& pair)
{
  const Shape s = x_hat.shape();
  if (s.size() != 2 || pair.a_pre.shape() != Shape{s[0], s[0]} ||
      pair.a_gau.shape() != Shape{s[0], s[0]})
    throw std::invalid_argument("shape mismatch in ggcn: features " + to_string(s) + ", a_pre " +
                                to_string(pair.a_pre.shape()) + ", a_gau " +
                                to_string(pair.a_gau.shape()));
  return {ad::matmul(pair.a_pre, x_hat), ad::matmul(pair.a_gau, x_hat)};
}

ad::Var ggcn_combine(const Propagated& features, const GGCNWeights& weights)
{
  const Shape s = features.pre.shape();
  if (weights.w_pre.shape() != Shape{s[1], s[1]} || weights.w_gau.shape() != Shape{s[1], s[1]})
    throw std::invalid_argument("shape mismatch in ggcn: features " + to_string(s) +
                                ", weights " + to_string(weights.w_pre.shape()) + " / " +
                                to_string(weights.w_gau.shape()));
  return ad::layer_norm(ad::add(ad::matmul(features.pre, weights.w_pre),
                                ad::matmul(features.gau, weights.w_gau)));
}

ad::Var ggcn_apply(ad::Var x_hat, const GraphPair& pair, const GGCNWeights& weights)
{
  return ggcn_combine(propagate(x_hat, pair), weights);
}

} // namespace ibn::graph
