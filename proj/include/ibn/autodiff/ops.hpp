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

#ifndef IBN_AUTODIFF_OPS_HPP_
#define IBN_AUTODIFF_OPS_HPP_

#include <initializer_list>
#include <span>

#include "ibn/autodiff/tape.hpp"

// Differentiable primitives. Every operation records its result on the tape
// of its first argument; mixing tapes is an error. Row-wise operations act on
// the last axis, treating everything before it as rows.
namespace ibn::ad {

inline constexpr double kLayerNormEps = 1e-5;

Var matmul(Var a, Var b); // [m,k] x [k,n] -> [m,n]

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// a: [..., n], bias: [n], broadcast over rows.
Var add_bias(Var a, Var bias);

Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var one_minus(Var a);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var a, std::size_t begin, std::size_t end);

Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);
Var transpose(Var a);

Var softmax(Var a);
// Columns whose mask entry is false receive exactly zero weight and never
// influence the result.
Var softmax(Var a, const Mask& column_mask);

// Exact GeLU, x * Phi(x) with the Gaussian CDF.
Var gelu(Var a);
// ELU with alpha = 1.
Var elu(Var a);
Var relu(Var a);
Var exp(Var a);
Var square(Var a);
// The derivative at 0 is taken as 0.
Var sqrt(Var a);
Var abs(Var a);

// Normalizes the last axis to zero mean and unit variance; no affine terms.
Var layer_norm(Var a, double eps = kLayerNormEps);

// keep_mask holds 0/1 entries with a's shape; survivors scale by 1/(1-p).
Var dropout(Var a, const Tensor& keep_mask, double p);

// x: [n,d] -> [n,n] of squared Euclidean distances between rows.
Var pairwise_sq_dist(Var x);

// Elementwise mean and population standard deviation over equally shaped
// samples.
Var sample_mean(std::span<const Var> samples);
Var sample_std(std::span<const Var> samples);

} // namespace ibn::ad

#endif
