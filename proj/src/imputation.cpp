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

#include "ibn/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ibn::imputation {

namespace {

// Returns false when every variable is observed.
bool check_mask(const Mask& mask)
{
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw std::invalid_argument("no observed variables to interpolate from");
  return !std::all_of(mask.begin(), mask.end(), [](bool b) { return b; });
}

} // namespace

ad::Var interpolation_weights(const Mask& mask, ad::Var embed)
{
  if (!check_mask(mask)) return {};
  const Shape es = embed.shape();
  if (es.size() != 2 || es[0] != mask.size() || es[1] == 0)
    throw std::invalid_argument("node embedding " + to_string(es) + " does not match mask of " +
                                std::to_string(mask.size()) + " variables");
  const double inv_sqrt_de = 1.0 / std::sqrt(static_cast<double>(es[1]));
  auto logits = ad::scale(ad::matmul(embed, ad::transpose(embed)), inv_sqrt_de);
  return ad::softmax(logits, mask);
}

ad::Var interpolate(ad::Var x, const Mask& mask, ad::Var weights)
{
  const Shape s = x.shape();
  if (s.size() != 2 || mask.size() != s[0])
    throw std::invalid_argument("interpolation input " + to_string(s) + " does not match mask of " +
                                std::to_string(mask.size()) + " variables");
  if (!check_mask(mask)) return x;
  if (weights.shape() != Shape{s[0], s[0]})
    throw std::invalid_argument("interpolation weights " + to_string(weights.shape()) +
                                " do not match input " + to_string(s));

  auto interpolated = ad::matmul(weights, x);
  Tensor keep(s), fill(s);
  for (std::size_t i = 0; i < s[0]; ++i)
    for (std::size_t d = 0; d < s[1]; ++d)
    {
      keep.at(i, d) = mask[i] ? 1.0 : 0.0;
      fill.at(i, d) = mask[i] ? 0.0 : 1.0;
    }
  auto& tape = x.tape();
  return ad::add(ad::mul(x, tape.constant(std::move(keep))),
                 ad::mul(interpolated, tape.constant(std::move(fill))));
}

ad::Var interpolation_attention(ad::Var x, const Mask& mask, ad::Var embed)
{
  const Shape s = x.shape();
  if (s.size() != 2 || mask.size() != s[0])
    throw std::invalid_argument("interpolation input " + to_string(s) + " does not match mask of " +
                                std::to_string(mask.size()) + " variables");
  if (!check_mask(mask)) return x;
  return interpolate(x, mask, interpolation_weights(mask, embed));
}

Tensor dropout_keep_mask(const Shape& shape, double p, const Stream& stream)
{
  Tensor keep(shape);
  for (std::size_t e = 0; e < keep.size(); ++e) keep[e] = stream.uniform(e) >= p ? 1.0 : 0.0;
  return keep;
}

UAIOutput uai_forward(ad::Var x_ia, ad::Var w, ad::Var b, const UAISettings& settings,
                      const Stream& stream)
{
  if (settings.samples == 0) throw std::invalid_argument("UAI needs at least one Monte Carlo sample");
  if (!(settings.p >= 0.0 && settings.p < 1.0))
    throw std::invalid_argument("UAI dropout rate must be in [0, 1)");

  auto projected = ad::add_bias(ad::matmul(x_ia, w), b);
  auto& tape = x_ia.tape();
  if (settings.deterministic)
  {
    auto sigma = tape.constant(Tensor(projected.shape()));
    return {projected, sigma, projected};
  }

  // Sample s is z * k_s / (1 - p) for a 0/1 keep mask k_s, so the sample
  // mean and population std factor elementwise into z * mean(k) / (1 - p)
  // and |z| * std(k) / (1 - p).
  const Shape shape = projected.shape();
  std::vector<std::size_t> kept(element_count(shape), 0);
  for (std::size_t s = 0; s < settings.samples; ++s)
  {
    const Stream sub = stream.child(s);
    for (std::size_t e = 0; e < kept.size(); ++e)
      if (sub.uniform(e) >= settings.p) ++kept[e];
  }
  const double count = static_cast<double>(settings.samples);
  const double scale = 1.0 / (1.0 - settings.p);
  Tensor mean_gain(shape), std_gain(shape);
  for (std::size_t e = 0; e < kept.size(); ++e)
  {
    const double q = static_cast<double>(kept[e]) / count;
    mean_gain[e] = q * scale;
    std_gain[e] = std::sqrt(q * (1.0 - q)) * scale;
  }

  auto mu = ad::mul(projected, tape.constant(std::move(mean_gain)));
  auto sigma = ad::mul(ad::abs(projected), tape.constant(std::move(std_gain)));
  auto x_hat = ad::div(mu, ad::shift(sigma, 1.0));
  return {mu, sigma, x_hat};
}

} // namespace ibn::imputation
