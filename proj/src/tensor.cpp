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

#include "ibn/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace ibn {

std::string to_string(const Shape& shape)
{
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
  {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t element_count(const Shape& shape)
{
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(Shape shape, double fill)
: _shape(std::move(shape)), _data(element_count(_shape), fill)
{
}

Tensor::Tensor(Shape shape, std::vector<double> data)
: _shape(std::move(shape)), _data(std::move(data))
{
  if (_data.size() != element_count(_shape))
    throw std::invalid_argument("tensor data size " + std::to_string(_data.size()) +
                                " does not match shape " + to_string(_shape));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values)
{
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n)
{
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

double Tensor::item() const
{
  if (_data.size() != 1)
    throw std::logic_error("item() on tensor of shape " + to_string(_shape));
  return _data[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
  if (element_count(shape) != _data.size())
    throw std::invalid_argument("cannot reshape " + to_string(_shape) + " to " +
                                to_string(shape));
  return Tensor(std::move(shape), _data);
}

void Tensor::fill(double v)
{
  std::fill(_data.begin(), _data.end(), v);
}

} // namespace ibn
