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

#include "ibn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ibn/graph.hpp"
#include "ibn/rng.hpp"

namespace ibn::data {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line)
{
  return path.string() + ":" + std::to_string(line);
}

std::ifstream open_in(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line)
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& cell, const std::filesystem::path& path, std::size_t line)
{
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty())
    throw std::runtime_error(where(path, line) + ": non-numeric cell '" + cell + "'");
  if (!std::isfinite(v))
    throw std::runtime_error(where(path, line) + ": non-finite value '" + cell + "'");
  return v;
}

bool blank(const std::string& line)
{
  return trim(line).empty();
}

// Reads rows of reals; every row must have `width` fields (0 = take the first
// row's width).
std::vector<double> read_matrix(std::istream& in, const std::filesystem::path& path,
                                std::size_t first_line, std::size_t& width, std::size_t& rows)
{
  std::vector<double> data;
  std::string line;
  std::size_t lineno = first_line;
  rows = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw std::runtime_error(where(path, lineno) + ": ragged row, expected " +
                               std::to_string(width) + " fields, got " +
                               std::to_string(fields.size()));
    for (const auto& f : fields) data.push_back(parse_real(f, path, lineno));
    ++rows;
  }
  return data;
}

} // namespace

std::string format_real(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SeriesSet load_csv_series(const std::filesystem::path& path)
{
  auto in = open_in(path);
  std::string header;
  if (!std::getline(in, header) || blank(header))
    throw std::runtime_error(where(path, 1) + ": missing header row");
  SeriesSet s;
  s.ids = split_fields(header);
  for (const auto& id : s.ids)
    if (id.empty()) throw std::runtime_error(where(path, 1) + ": empty variable id");
  std::size_t width = s.ids.size(), rows = 0;
  auto data = read_matrix(in, path, 1, width, rows);
  if (rows == 0) throw std::runtime_error(path.string() + ": no data rows");
  s.values = Tensor({rows, width}, std::move(data));
  return s;
}

void save_csv_series(const std::filesystem::path& path, const SeriesSet& series)
{
  auto out = open_out(path);
  const std::size_t n = series.variables();
  for (std::size_t j = 0; j < n; ++j)
  {
    if (j) out << ',';
    out << (j < series.ids.size() ? series.ids[j] : "v" + std::to_string(j));
  }
  out << '\n';
  for (std::size_t t = 0; t < series.steps(); ++t)
  {
    for (std::size_t j = 0; j < n; ++j)
    {
      if (j) out << ',';
      out << format_real(series.values.at(t, j));
    }
    out << '\n';
  }
}

Tensor load_adjacency(const std::filesystem::path& path)
{
  auto in = open_in(path);
  std::size_t width = 0, rows = 0;
  auto data = read_matrix(in, path, 0, width, rows);
  if (rows == 0) throw std::runtime_error(path.string() + ": empty adjacency");
  if (rows != width)
    throw std::runtime_error(path.string() + ": adjacency must be square, got " +
                             std::to_string(rows) + "x" + std::to_string(width));
  return Tensor({rows, width}, std::move(data));
}

void save_adjacency(const std::filesystem::path& path, const Tensor& matrix)
{
  auto out = open_out(path);
  for (std::size_t i = 0; i < matrix.dim(0); ++i)
  {
    for (std::size_t j = 0; j < matrix.dim(1); ++j)
    {
      if (j) out << ',';
      out << format_real(matrix.at(i, j));
    }
    out << '\n';
  }
}

Tensor load_coords(const std::filesystem::path& path, std::vector<std::string>* ids)
{
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split_fields(line) != std::vector<std::string>{"id", "x", "y"})
    throw std::runtime_error(where(path, 1) + ": expected header 'id,x,y'");
  std::vector<double> data;
  std::size_t lineno = 1;
  if (ids) ids->clear();
  while (std::getline(in, line))
  {
    ++lineno;
    if (blank(line)) continue;
    const auto f = split_fields(line);
    if (f.size() != 3)
      throw std::runtime_error(where(path, lineno) + ": ragged row, expected 3 fields, got " +
                               std::to_string(f.size()));
    if (ids) ids->push_back(f[0]);
    data.push_back(parse_real(f[1], path, lineno));
    data.push_back(parse_real(f[2], path, lineno));
  }
  const std::size_t n = data.size() / 2;
  return Tensor({n, 2}, std::move(data));
}

void save_coords(const std::filesystem::path& path, const Tensor& coords,
                 const std::vector<std::string>& ids)
{
  auto out = open_out(path);
  out << "id,x,y\n";
  for (std::size_t i = 0; i < coords.dim(0); ++i)
    out << (i < ids.size() ? ids[i] : "v" + std::to_string(i)) << ',' << format_real(coords.at(i, 0))
        << ',' << format_real(coords.at(i, 1)) << '\n';
}

Tensor Scaler::apply(const Tensor& values) const
{
  Tensor out = values;
  const std::size_t n = values.dim(1);
  for (std::size_t t = 0; t < values.dim(0); ++t)
    for (std::size_t j = 0; j < n; ++j) out.at(t, j) = (values.at(t, j) - mean[j]) / stddev[j];
  return out;
}

Tensor Scaler::inverse(const Tensor& values) const
{
  Tensor out = values;
  const std::size_t n = values.dim(1);
  for (std::size_t t = 0; t < values.dim(0); ++t)
    for (std::size_t j = 0; j < n; ++j) out.at(t, j) = values.at(t, j) * stddev[j] + mean[j];
  return out;
}

Scaler zscore_fit(const Tensor& train_values)
{
  if (train_values.rank() != 2 || train_values.dim(0) == 0)
    throw std::invalid_argument("zscore_fit expects a non-empty [T,N] matrix");
  const std::size_t t = train_values.dim(0), n = train_values.dim(1);
  Scaler s;
  s.mean.assign(n, 0.0);
  s.stddev.assign(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
  {
    double m = 0.0;
    for (std::size_t i = 0; i < t; ++i) m += train_values.at(i, j);
    m /= static_cast<double>(t);
    double v = 0.0;
    for (std::size_t i = 0; i < t; ++i)
    {
      const double d = train_values.at(i, j) - m;
      v += d * d;
    }
    const double sd = std::sqrt(v / static_cast<double>(t));
    s.mean[j] = m;
    s.stddev[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

SplitBounds chronological_split(std::size_t t, double train_ratio, double val_ratio)
{
  if (!(train_ratio > 0.0) || !(val_ratio >= 0.0) || train_ratio + val_ratio >= 1.0)
    throw std::invalid_argument("split ratios must satisfy 0 < train, 0 <= val, train + val < 1");
  SplitBounds b;
  b.total = t;
  // Each part is floored on its own; 0.7 + 0.1 is not 0.8 in binary.
  auto part = [t](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(t) + 1e-9));
  };
  b.train_end = part(train_ratio);
  b.val_end = b.train_end + part(val_ratio);
  return b;
}

std::size_t masked_count(std::size_t n, double rate)
{
  if (!(rate >= 0.0)) throw std::invalid_argument("mask rate must be non-negative");
  if (rate >= 1.0) throw std::invalid_argument("mask rate must be below 1");
  // The small offset keeps rates like 0.25 * 4 from landing just below 1.
  const auto k = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
  if (k >= n && n > 0) throw std::invalid_argument("mask rate leaves no observed variables");
  return k;
}

Mask draw_variable_mask(std::size_t n, double rate, std::uint64_t seed)
{
  const std::size_t k = masked_count(n, rate);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Stream stream = Stream(seed).child(0x6d61736bULL);
  for (std::size_t i = n; i > 1; --i)
  {
    const std::size_t j = static_cast<std::size_t>(stream.bits(i) % i);
    std::swap(order[i - 1], order[j]);
  }
  Mask mask(n, true);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = false;
  return mask;
}

Tensor zero_fill(const Tensor& values, const Mask& mask)
{
  if (values.rank() != 2 || values.dim(1) != mask.size())
    throw std::invalid_argument("mask size " + std::to_string(mask.size()) +
                                " does not match values " + to_string(values.shape()));
  Tensor out = values;
  for (std::size_t t = 0; t < values.dim(0); ++t)
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (!mask[j]) out.at(t, j) = 0.0;
  return out;
}

MaskedSeries apply_variable_mask(const Tensor& normalized, double rate, std::uint64_t seed)
{
  MaskedSeries m;
  m.mask = draw_variable_mask(normalized.dim(1), rate, seed);
  m.values = zero_fill(normalized, m.mask);
  return m;
}

std::vector<Window> window_dataset(const Tensor& masked, const Tensor& full, std::size_t begin,
                                   std::size_t end, std::size_t h, std::size_t l,
                                   std::size_t stride)
{
  if (masked.shape() != full.shape() || masked.rank() != 2)
    throw std::invalid_argument("window_dataset: masked and full series differ in shape");
  if (h == 0 || l == 0 || stride == 0)
    throw std::invalid_argument("window_dataset: history, horizon and stride must be positive");
  if (end > masked.dim(0) || begin > end)
    throw std::invalid_argument("window_dataset: range out of bounds");
  const std::size_t span = end - begin;
  if (span < h + l)
    throw std::invalid_argument("series too short: " + std::to_string(span) +
                                " steps, need at least " + std::to_string(h + l));
  const std::size_t n = masked.dim(1);
  std::vector<Window> out;
  for (std::size_t s = begin; s + h + l <= end; s += stride)
  {
    Window w;
    w.start = s;
    w.x = Tensor({n, h, 1});
    w.x_true = Tensor({n, h, 1});
    w.y = Tensor({n, l});
    for (std::size_t i = 0; i < n; ++i)
    {
      for (std::size_t k = 0; k < h; ++k)
      {
        w.x[i * h + k] = masked.at(s + k, i);
        w.x_true[i * h + k] = full.at(s + k, i);
      }
      for (std::size_t k = 0; k < l; ++k) w.y.at(i, k) = full.at(s + h + k, i);
    }
    out.push_back(std::move(w));
  }
  return out;
}

Datasets prepare_datasets(const SeriesSet& series, const DataOptions& options)
{
  const std::size_t t = series.steps();
  if (t <= options.history + options.horizon)
    throw std::invalid_argument("series too short: T=" + std::to_string(t) + " must exceed H+L=" +
                                std::to_string(options.history + options.horizon));
  for (double v : series.values.data())
    if (!std::isfinite(v)) throw std::invalid_argument("series contains non-finite values");

  Datasets d;
  d.bounds = chronological_split(t, options.train_ratio, options.val_ratio);
  Tensor train_rows({d.bounds.train_end, series.variables()});
  std::copy_n(series.values.data().begin(), train_rows.size(), train_rows.data().begin());
  d.scaler = zscore_fit(train_rows);

  const Tensor normalized = d.scaler.apply(series.values);
  auto masked = apply_variable_mask(normalized, options.mask_rate, options.mask_seed);
  d.mask = masked.mask;

  const std::size_t h = options.history, l = options.horizon;
  d.train = window_dataset(masked.values, normalized, 0, d.bounds.train_end, h, l);
  d.val = window_dataset(masked.values, normalized, d.bounds.train_end, d.bounds.val_end, h, l);
  d.test = window_dataset(masked.values, normalized, d.bounds.val_end, t, h, l);
  return d;
}

SyntheticData generate_synthetic(const SyntheticOptions& o)
{
  if (o.n < 2) throw std::invalid_argument("synthetic generator needs n >= 2");
  if (o.t == 0) throw std::invalid_argument("synthetic generator needs t >= 1");
  if (!(o.period > 0.0)) throw std::invalid_argument("period must be positive");

  const Stream root(o.seed);
  const Stream placement = root.child(1), phases = root.child(2), initial = root.child(3),
               noise = root.child(4);
  auto gaussian = [](const Stream& s, std::uint64_t i) {
    // Box-Muller on two counter draws
    const double u1 = 1.0 - s.uniform(2 * i);
    const double u2 = s.uniform(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };

  const std::size_t n = o.n;
  SyntheticData out;
  Tensor coords({n, 2});
  for (std::size_t i = 0; i < 2 * n; ++i) coords[i] = placement.uniform(i);

  const Tensor dist = graph::distances_from_coords(coords);
  out.threshold = graph::median_offdiagonal(dist);
  out.graph = graph::build_predefined(dist, out.threshold);

  std::vector<double> phi(n), x(n), next(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = 2.0 * std::numbers::pi * phases.uniform(i);
  for (std::size_t i = 0; i < n; ++i) x[i] = gaussian(initial, i);

  Tensor values({o.t, n});
  for (std::size_t i = 0; i < n; ++i) values.at(0, i) = x[i];
  for (std::size_t step = 0; step + 1 < o.t; ++step)
  {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(step) / o.period;
    for (std::size_t i = 0; i < n; ++i)
    {
      double ax = 0.0;
      for (std::size_t j = 0; j < n; ++j) ax += out.graph.at(i, j) * x[j];
      double v = (1.0 - o.alpha) * x[i] + o.alpha * ax;
      if (o.beta != 0.0) v += o.beta * std::sin(angle + phi[i]);
      if (o.noise_std != 0.0) v += o.noise_std * gaussian(noise, step * n + i);
      next[i] = v;
    }
    x.swap(next);
    for (std::size_t i = 0; i < n; ++i) values.at(step + 1, i) = x[i];
  }

  out.series.values = std::move(values);
  out.series.coords = coords;
  for (std::size_t i = 0; i < n; ++i) out.series.ids.push_back("v" + std::to_string(i));
  return out;
}

std::uint64_t fingerprint(const Tensor& values)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i)
    {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t d : values.shape())
  {
    const std::uint64_t v = d;
    feed(&v, sizeof v);
  }
  for (double v : values.data()) feed(&v, sizeof v);
  return h;
}

} // namespace ibn::data
