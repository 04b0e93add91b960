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

#include "ibn/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ibn::ad {

namespace {

void same_shape(const char* op, const Var& a, const Var& b)
{
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string("shape mismatch in ") + op + ": " +
                                to_string(a.shape()) + " vs " + to_string(b.shape()));
}

void require_rank(const char* op, const Var& a, std::size_t rank)
{
  if (a.shape().size() != rank)
    throw std::invalid_argument(std::string(op) + " expects rank " + std::to_string(rank) +
                                ", got shape " + to_string(a.shape()));
}

// Elementwise unary op: y = f(x), dy/dx = df(x, y).
template <typename F, typename DF>
Var unary(Var a, F f, DF df)
{
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape().record(std::move(y), {a}, [a, df](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(a.id());
    const Tensor& y = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * df(x[i], y[i]);
  });
}

// Incremental mean in sample order; exact when all samples agree.
Tensor running_mean(std::span<const Var> samples)
{
  Tensor mu = samples[0].value();
  for (std::size_t k = 1; k < samples.size(); ++k)
  {
    const Tensor& x = samples[k].value();
    const double w = 1.0 / static_cast<double>(k + 1);
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += (x[i] - mu[i]) * w;
  }
  return mu;
}

double normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_pdf(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

} // namespace

namespace {

// C += A B for row-major A [m,k], B [k,n].
void gemm_acc(const double* __restrict A, const double* __restrict B, double* __restrict C,
              std::size_t m, std::size_t k, std::size_t n)
{
  for (std::size_t i = 0; i < m; ++i)
  {
    double* __restrict ci = C + i * n;
    for (std::size_t p = 0; p < k; ++p)
    {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* __restrict bp = B + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += A^T B for A [k,m], B [k,n]; C is [m,n].
void gemm_tn_acc(const double* __restrict A, const double* __restrict B, double* __restrict C,
                 std::size_t k, std::size_t m, std::size_t n)
{
  for (std::size_t p = 0; p < k; ++p)
  {
    const double* __restrict bp = B + p * n;
    for (std::size_t i = 0; i < m; ++i)
    {
      const double api = A[p * m + i];
      if (api == 0.0) continue;
      double* __restrict ci = C + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

// C += A B^T for A [m,n], B [k,n]; C is [m,k].
void gemm_nt_acc(const double* __restrict A, const double* __restrict B, double* __restrict C,
                 std::size_t m, std::size_t n, std::size_t k)
{
  for (std::size_t i = 0; i < m; ++i)
  {
    const double* __restrict ai = A + i * n;
    for (std::size_t p = 0; p < k; ++p)
    {
      const double* __restrict bp = B + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      C[i * k + p] += s;
    }
  }
}

} // namespace

Var matmul(Var a, Var b)
{
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k)
    throw std::invalid_argument("shape mismatch in matmul: " + to_string(A.shape()) +
                                " vs " + to_string(B.shape()));
  Tensor C({m, n});
  gemm_acc(A.data().data(), B.data().data(), C.data().data(), m, k, n);

  return a.tape().record(std::move(C), {a, b}, [a, b, m, k, n](Tape& t, std::size_t self) {
    const double* G = t.grad(self).data().data();
    if (Tensor* ga = t.grad_sink(a.id())) // dA = G B^T
      gemm_nt_acc(G, t.value(b.id()).data().data(), ga->data().data(), m, n, k);
    if (Tensor* gb = t.grad_sink(b.id())) // dB = A^T G
      gemm_tn_acc(t.value(a.id()).data().data(), G, gb->data().data(), m, k, n);
  });
}

Var add(Var a, Var b)
{
  same_shape("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  return a.tape().record(std::move(z), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (const Var& v : {a, b})
      if (Tensor* gv = t.grad_sink(v.id()))
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
  });
}

Var sub(Var a, Var b)
{
  same_shape("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
  return a.tape().record(std::move(z), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_sink(a.id()))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (Tensor* gb = t.grad_sink(b.id()))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(Var a, Var b)
{
  same_shape("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  return a.tape().record(std::move(z), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_sink(a.id()))
    {
      const Tensor& y = t.value(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
    }
    if (Tensor* gb = t.grad_sink(b.id()))
    {
      const Tensor& x = t.value(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
    }
  });
}

Var div(Var a, Var b)
{
  same_shape("div", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] / y[i];
  return a.tape().record(std::move(z), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(b.id());
    if (Tensor* ga = t.grad_sink(a.id()))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / y[i];
    if (Tensor* gb = t.grad_sink(b.id()))
    {
      const Tensor& z = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * z[i] / y[i];
    }
  });
}

Var add_bias(Var a, Var bias)
{
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rank() != 1 || b.size() != x.cols())
    throw std::invalid_argument("shape mismatch in add_bias: " + to_string(x.shape()) +
                                " vs " + to_string(b.shape()));
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor z(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) z[r * cols + c] = x[r * cols + c] + b[c];
  return a.tape().record(std::move(z), {a, bias}, [a, bias, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* ga = t.grad_sink(a.id()))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (Tensor* gb = t.grad_sink(bias.id()))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += g[r * cols + c];
  });
}

Var scale(Var a, double factor)
{
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var shift(Var a, double offset)
{
  return unary(a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Var one_minus(Var a)
{
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var concat(std::initializer_list<Var> parts)
{
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat(std::span<const Var> parts)
{
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts)
  {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin()))
      throw std::invalid_argument("shape mismatch in concat: " + to_string(first) + " vs " +
                                  to_string(s));
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Tensor z(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k)
  {
    const Tensor& x = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(&x[r * widths[k]], widths[k], &z[r * total + offset]);
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(
    std::move(z), parts, [inputs, widths, rows, total](Tape& t, std::size_t self) {
      const Tensor& g = t.grad(self);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k)
      {
        if (Tensor* gk = t.grad_sink(inputs[k].id()))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c)
              (*gk)[r * widths[k] + c] += g[r * total + offset + c];
        offset += widths[k];
      }
    });
}

Var slice(Var a, std::size_t begin, std::size_t end)
{
  const Tensor& x = a.value();
  const std::size_t cols = x.cols(), rows = x.rows();
  if (begin >= end || end > cols)
    throw std::invalid_argument("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") out of range for shape " + to_string(x.shape()));
  const std::size_t w = end - begin;
  Shape s = x.shape();
  s.back() = w;
  Tensor z(s);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(&x[r * cols + begin], w, &z[r * w]);
  return a.tape().record(std::move(z), {a}, [a, begin, w, rows, cols](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) (*ga)[r * cols + begin + c] += g[r * w + c];
  });
}

Var sum(Var a)
{
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const double g = t.grad(self)[0];
    for (auto& v : ga->data()) v += g;
  });
}

Var mean(Var a)
{
  const std::size_t n = a.value().size();
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var reshape(Var a, Shape shape)
{
  Tensor z = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(z), {a}, [a](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  });
}

Var transpose(Var a)
{
  require_rank("transpose", a, 2);
  const Tensor& x = a.value();
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor z({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) z[j * m + i] = x[i * n + j];
  return a.tape().record(std::move(z), {a}, [a, m, n](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[j * m + i];
  });
}

Var softmax(Var a)
{
  return softmax(a, Mask{});
}

Var softmax(Var a, const Mask& column_mask)
{
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (!column_mask.empty() && column_mask.size() != cols)
    throw std::invalid_argument("softmax column mask has " + std::to_string(column_mask.size()) +
                                " entries for shape " + to_string(x.shape()));
  auto active = [&](std::size_t c) { return column_mask.empty() || column_mask[c]; };
  if (!column_mask.empty() && std::none_of(column_mask.begin(), column_mask.end(),
                                           [](bool b) { return b; }))
    throw std::invalid_argument("softmax with every column masked");

  Tensor z(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
  {
    const double* xr = &x[r * cols];
    double* zr = &z[r * cols];
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c)
      if (active(c)) mx = std::max(mx, xr[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
    {
      zr[c] = active(c) ? std::exp(xr[c] - mx) : 0.0;
      s += zr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) zr[c] /= s;
  }
  return a.tape().record(std::move(z), {a}, [a, rows, cols](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    for (std::size_t r = 0; r < rows; ++r)
    {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        (*ga)[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
}

Var gelu(Var a)
{
  return unary(a, [](double x) { return x * normal_cdf(x); },
               [](double x, double) { return normal_cdf(x) + x * normal_pdf(x); });
}

Var elu(Var a)
{
  return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Var relu(Var a)
{
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a)
{
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a)
{
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a)
{
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var abs(Var a)
{
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var layer_norm(Var a, double eps)
{
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor z(x.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r)
  {
    const double* xr = &x[r * cols];
    double m = 0.0;
    for (std::size_t c = 0; c < cols; ++c) m += xr[c];
    m /= static_cast<double>(cols);
    double v = 0.0;
    for (std::size_t c = 0; c < cols; ++c) v += (xr[c] - m) * (xr[c] - m);
    v /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(v + eps);
    for (std::size_t c = 0; c < cols; ++c) z[r * cols + c] = (xr[c] - m) * inv_std[r];
  }
  return a.tape().record(std::move(z), {a}, [a, rows, cols, inv_std](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r)
    {
      double gm = 0.0, gy = 0.0;
      for (std::size_t c = 0; c < cols; ++c)
      {
        gm += g[r * cols + c];
        gy += g[r * cols + c] * y[r * cols + c];
      }
      gm /= n;
      gy /= n;
      for (std::size_t c = 0; c < cols; ++c)
        (*ga)[r * cols + c] += inv_std[r] * (g[r * cols + c] - gm - y[r * cols + c] * gy);
    }
  });
}

Var dropout(Var a, const Tensor& keep_mask, double p)
{
  if (keep_mask.shape() != a.shape())
    throw std::invalid_argument("shape mismatch in dropout: " + to_string(a.shape()) + " vs " +
                                to_string(keep_mask.shape()));
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor factor(keep_mask.shape());
  for (std::size_t i = 0; i < factor.size(); ++i) factor[i] = keep_mask[i] * keep_scale;
  const Tensor& x = a.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * factor[i];
  return a.tape().record(std::move(z), {a}, [a, factor = std::move(factor)](Tape& t, std::size_t self) {
    Tensor* ga = t.grad_sink(a.id());
    if (!ga) return;
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * factor[i];
  });
}

Var pairwise_sq_dist(Var x)
{
  require_rank("pairwise_sq_dist", x, 2);
  const Tensor& v = x.value();
  const std::size_t n = v.dim(0), d = v.dim(1);
  Tensor z({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
    {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k)
      {
        const double diff = v[i * d + k] - v[j * d + k];
        s += diff * diff;
      }
      z[i * n + j] = s;
      z[j * n + i] = s;
    }
  return x.tape().record(std::move(z), {x}, [x, n, d](Tape& t, std::size_t self) {
    Tensor* gx = t.grad_sink(x.id());
    if (!gx) return;
    const Tensor& g = t.grad(self);
    const Tensor& v = t.value(x.id());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
      {
        if (i == j) continue;
        // d(s_ij)/dx_i = 2 (x_i - x_j), counted from both (i,j) and (j,i).
        const double w = 2.0 * (g[i * n + j] + g[j * n + i]);
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k)
          (*gx)[i * d + k] += w * (v[i * d + k] - v[j * d + k]);
      }
  });
}

Var sample_mean(std::span<const Var> samples)
{
  if (samples.empty()) throw std::invalid_argument("sample_mean of zero samples");
  const Shape& s = samples[0].shape();
  for (const auto& v : samples)
    if (v.shape() != s)
      throw std::invalid_argument("shape mismatch in sample_mean: " + to_string(s) + " vs " +
                                  to_string(v.shape()));
  const double inv = 1.0 / static_cast<double>(samples.size());
  Tensor z = running_mean(samples);
  std::vector<Var> inputs(samples.begin(), samples.end());
  return samples[0].tape().record(std::move(z), samples, [inputs, inv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (const auto& v : inputs)
      if (Tensor* gv = t.grad_sink(v.id()))
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i] * inv;
  });
}

Var sample_std(std::span<const Var> samples)
{
  if (samples.empty()) throw std::invalid_argument("sample_std of zero samples");
  const Shape& s = samples[0].shape();
  for (const auto& v : samples)
    if (v.shape() != s)
      throw std::invalid_argument("shape mismatch in sample_std: " + to_string(s) + " vs " +
                                  to_string(v.shape()));
  const double inv = 1.0 / static_cast<double>(samples.size());
  Tensor mu = running_mean(samples);
  Tensor z(s);
  for (const auto& v : samples)
  {
    const Tensor& x = v.value();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += (x[i] - mu[i]) * (x[i] - mu[i]);
  }
  for (auto& e : z.data()) e = std::sqrt(e * inv);
  std::vector<Var> inputs(samples.begin(), samples.end());
  return samples[0].tape().record(
    std::move(z), samples, [inputs, inv, mu = std::move(mu)](Tape& t, std::size_t self) {
      // d sigma / d m_s = (m_s - mu) / (S sigma); the dependence through mu
      // cancels because the deviations sum to zero.
      const Tensor& g = t.grad(self);
      const Tensor& sigma = t.value(self);
      for (const auto& v : inputs)
        if (Tensor* gv = t.grad_sink(v.id()))
        {
          const Tensor& x = t.value(v.id());
          for (std::size_t i = 0; i < g.size(); ++i)
            if (sigma[i] > 0.0) (*gv)[i] += g[i] * (x[i] - mu[i]) * inv / sigma[i];
        }
    });
}

} // namespace ibn::ad
