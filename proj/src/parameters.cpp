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

#include "ibn/parameters.hpp"

#include <stdexcept>

namespace ibn {

ParamId ParameterSet::add(std::string name, Tensor value)
{
  if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
  _names.push_back(std::move(name));
  _values.push_back(std::move(value));
  return ParamId{_values.size() - 1};
}

std::size_t ParameterSet::scalar_count() const
{
  std::size_t n = 0;
  for (const auto& v : _values) n += v.size();
  return n;
}

std::optional<ParamId> ParameterSet::find(const std::string& name) const
{
  for (std::size_t i = 0; i < _names.size(); ++i)
    if (_names[i] == name) return ParamId{i};
  return std::nullopt;
}

} // namespace ibn
