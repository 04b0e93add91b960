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

#ifndef IBN_TENSOR_HPP_
#define IBN_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ibn {

using Shape = std::vector<std::size_t>;

// One flag per variable or column; true means observed / active.
using Mask = std::vector<bool>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Dense row-major array of doubles.
class Tensor
{
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return _shape; }
  std::size_t rank() const { return _shape.size(); }
  std::size_t dim(std::size_t axis) const { return _shape.at(axis); }
  std::size_t size() const { return _data.size(); }
  bool empty() const { return _data.empty(); }

  // Last axis length and the product of all leading axes.
  std::size_t cols() const { return _shape.empty() ? 0 : _shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : _data.size() / cols(); }

  std::span<double> data() { return _data; }
  std::span<const double> data() const { return _data; }
  std::vector<double>& storage() { return _data; }
  const std::vector<double>& storage() const { return _data; }

  double& operator[](std::size_t i) { return _data[i]; }
  const double& operator[](std::size_t i) const { return _data[i]; }

  // 2D access over (rows(), cols()).
  double& at(std::size_t r, std::size_t c) { return _data[r * cols() + c]; }
  const double& at(std::size_t r, std::size_t c) const { return _data[r * cols() + c]; }

  double item() const;

  // Same data, new shape; element counts must agree.
  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool operator==(const Tensor& other) const = default;

private:
  Shape _shape;
  std::vector<double> _data;
};

} // namespace ibn

#endif
