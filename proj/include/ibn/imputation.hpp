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

#ifndef IBN_IMPUTATION_HPP_
#define IBN_IMPUTATION_HPP_

#include <cstddef>
#include <span>

#include "ibn/autodiff/ops.hpp"
#include "ibn/rng.hpp"

namespace ibn::imputation {

/// Rebuilds missing rows of `x` ([n,d]) from the observed rows.
///
/// mask[i] == false marks variable i as missing. Observed rows are returned
/// bit-for-bit; a missing row i becomes sum_j alpha_ij x_j over observed j,
/// with alpha_i = softmax_j(E_i . E_j / sqrt(d_e)). Values stored in missing
/// rows never reach the output.
ad::Var interpolation_attention(ad::Var x, const Mask& mask, ad::Var embed);

// The attention matrix alone; it depends on the embeddings and mask but not
// on x, so a recurrent unit computes it once per sequence. Invalid (default)
// when every variable is observed.
ad::Var interpolation_weights(const Mask& mask, ad::Var embed);
ad::Var interpolate(ad::Var x, const Mask& mask, ad::Var weights);

struct UAISettings
{
  double p = 0.1;
  std::size_t samples = 10;
  // Single pass without dropout: mu = xW + b, sigma = 0.
  bool deterministic = false;
};

struct UAIOutput
{
  ad::Var mu;
  ad::Var sigma;
  ad::Var x_hat;
};

// Keep-mask of 0/1 entries; entry e survives when stream.uniform(e) >= p.
Tensor dropout_keep_mask(const Shape& shape, double p, const Stream& stream);

/// Monte Carlo dropout over a shared linear map.
///
/// Sample s applies the keep-mask drawn from stream.child(s) to xW + b. The
/// output carries the sample mean mu, the population standard deviation
/// sigma and the attenuated value mu / (1 + sigma).
UAIOutput uai_forward(ad::Var x_ia, ad::Var w, ad::Var b, const UAISettings& settings,
                      const Stream& stream);

} // namespace ibn::imputation

#endif
