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

#ifndef IBN_GRAPH_HPP_
#define IBN_GRAPH_HPP_

#include "ibn/autodiff/ops.hpp"
#include "ibn/tensor.hpp"

// Predefined and feature-driven adjacency matrices and the dual-graph
// convolution built on them.
namespace ibn::graph {

// Row-wise Euclidean distances, [n,d] -> [n,n].
Tensor pairwise_euclidean(const Tensor& x);
ad::Var pairwise_euclidean(ad::Var x);

// exp(-D^2 / (2 gamma)), plus self-loops, then row softmax.
ad::Var gaussian_adjacency(ad::Var dist, double gamma);
// Same graph from squared distances; avoids differentiating through the
// square root at zero distance.
ad::Var gaussian_adjacency_from_sq(ad::Var sq_dist, double gamma);

// Static graph from a symmetric distance matrix. Pairs within `threshold`
// get weight exp(-d^2 / (2 mean(d)^2)), mean over off-diagonal pairs; the
// diagonal is 1 and rows are normalized to sum to 1.
Tensor build_predefined(const Tensor& distances, double threshold);
Tensor distances_from_coords(const Tensor& coords);
// Median over off-diagonal entries; the default connection threshold.
double median_offdiagonal(const Tensor& distances);
Tensor build_predefined_from_coords(const Tensor& coords, double threshold);

// Learned-embedding graph softmax(relu(e1 e2^T)), used for the AGCN variant.
ad::Var adaptive_adjacency(ad::Var e1, ad::Var e2);

struct GraphPair
{
  ad::Var a_pre;
  ad::Var a_gau;
  double gamma = 0.0;
  std::size_t n = 0;
};

// Dynamic graph from the current features, bandwidth = feature width.
GraphPair make_graph_pair(ad::Var a_pre, ad::Var x_hat);

struct GGCNWeights
{
  ad::Var w_pre;
  ad::Var w_gau;
};

// layer_norm((A_pre x) W_pre + (A_gau x) W_gau)
ad::Var ggcn_apply(ad::Var x_hat, const GraphPair& pair, const GGCNWeights& weights);

// The two graph products A_pre x and A_gau x. Gates convolving the same
// features share them and differ only in their weights.
struct Propagated
{
  ad::Var pre;
  ad::Var gau;
};

Propagated propagate(ad::Var x_hat, const GraphPair& pair);
ad::Var ggcn_combine(const Propagated& features, const GGCNWeights& weights);

} // namespace ibn::graph

#endif
