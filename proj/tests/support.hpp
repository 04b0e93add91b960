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

#ifndef IBN_TESTS_SUPPORT_HPP_
#define IBN_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ibn/autodiff/ops.hpp"
#include "ibn/tensor.hpp"

namespace ibn::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0)
{
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// |a - b| / max(|a|, |b|, floor); the floor only guards 0/0.
inline double relative_error(double a, double b, double floor = 1e-6)
{
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Builds a scalar from leaves on a fresh tape.
using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct GradCheck
{
  double max_rel = 0.0;
  std::string worst;
};

/// Five-point central differences against reverse mode for every entry of
/// every input. The fourth-order stencil allows a step small enough to stay
/// clear of kinks (|x|, ELU) while resolving gradients near 1e-7.
inline GradCheck check_gradients(const ScalarFn& f, std::vector<Tensor> inputs, double h = 1e-5)
{
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
  auto root = f(tape, leaves);
  const auto grads = tape.gradients(root, leaves);

  auto eval = [&](const std::vector<Tensor>& xs) {
    ad::Tape t;
    std::vector<ad::Var> ls;
    for (const auto& x : xs) ls.push_back(t.constant(x));
    return f(t, ls).value().item();
  };

  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k)
  {
    const Tensor& g = grads.at(leaves[k].id());
    for (std::size_t e = 0; e < inputs[k].size(); ++e)
    {
      const double orig = inputs[k][e];
      auto at = [&](double offset) {
        inputs[k][e] = orig + offset;
        return eval(inputs);
      };
      const double numeric = (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
      inputs[k][e] = orig;
      const double rel = relative_error(g[e], numeric);
      if (rel > out.max_rel)
      {
        out.max_rel = rel;
        char buf[160];
        std::snprintf(buf, sizeof buf, "input %zu entry %zu: analytic %.6g numeric %.6g", k, e, g[e],
                      numeric);
        out.worst = buf;
      }
    }
  }
  return out;
}

// sum(op(x) * R) for a fixed random R, so every output entry matters.
inline ScalarFn weighted_sum(std::function<ad::Var(const std::vector<ad::Var>&)> op, Tensor weights)
{
  return [op, weights](ad::Tape& tape, const std::vector<ad::Var>& xs) {
    auto y = op(xs);
    return ad::sum(ad::mul(y, tape.constant(weights.reshaped(y.shape()))));
  };
}

inline double row_sum_error(const Tensor& a)
{
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
  {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
  auto dir = std::filesystem::temp_directory_path() / ("ibn-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace ibn::testing

#endif
