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

#ifndef IBN_PARAMETERS_HPP_
#define IBN_PARAMETERS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ibn/tensor.hpp"

namespace ibn {

struct ParamId
{
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
  bool operator==(const ParamId&) const = default;
};

// Ordered, named collection of learnable tensors.
class ParameterSet
{
public:
  ParamId add(std::string name, Tensor value);

  std::size_t size() const { return _values.size(); }
  std::size_t scalar_count() const;

  const std::string& name(std::size_t i) const { return _names[i]; }
  Tensor& value(std::size_t i) { return _values[i]; }
  const Tensor& value(std::size_t i) const { return _values[i]; }
  Tensor& operator[](ParamId id) { return _values[id.index]; }
  const Tensor& operator[](ParamId id) const { return _values[id.index]; }

  std::optional<ParamId> find(const std::string& name) const;

  bool operator==(const ParameterSet&) const = default;

private:
  std::vector<std::string> _names;
  std::vector<Tensor> _values;
};

} // namespace ibn

#endif
