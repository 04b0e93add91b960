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

#include "ibn/autodiff/tape.hpp"

#include <stdexcept>

namespace ibn::ad {

const Tensor& Var::value() const
{
  return _tape->value(_id);
}

const Tensor& Var::grad() const
{
  return _tape->grad(_id);
}

Var Tape::leaf(Tensor value)
{
  _nodes.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, _nodes.size() - 1);
}

Var Tape::constant(Tensor value)
{
  _nodes.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, _nodes.size() - 1);
}

void Tape::check_owned(const Var& v) const
{
  if (v._tape != this || v._id >= _nodes.size())
    throw std::invalid_argument("variable does not belong to this tape");
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward)
{
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward)
{
  bool needs = false;
  for (const auto& in : inputs)
  {
    check_owned(in);
    needs = needs || _nodes[in._id].requires_grad;
  }
  Node node{std::move(value), {}, needs, {}};
  if (needs) node.backward = std::move(backward);
  _nodes.push_back(std::move(node));
  return Var(this, _nodes.size() - 1);
}

Tensor* Tape::grad_sink(std::size_t id)
{
  Node& n = _nodes[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

void Tape::backward(Var root)
{
  check_owned(root);
  if (_nodes[root._id].value.size() != 1)
    throw std::invalid_argument("backward requires scalar root, got shape " +
                                to_string(_nodes[root._id].value.shape()));

  for (auto& n : _nodes) n.grad = Tensor();
  if (!_nodes[root._id].requires_grad) return;
  _nodes[root._id].grad = Tensor(_nodes[root._id].value.shape(), 1.0);

  for (std::size_t i = root._id + 1; i-- > 0;)
  {
    Node& n = _nodes[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

Gradients Tape::gradients(Var root, std::span<const Var> leaves)
{
  backward(root);
  Gradients out;
  for (const auto& leaf : leaves)
  {
    check_owned(leaf);
    const Node& n = _nodes[leaf._id];
    out[leaf._id] = n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
  }
  return out;
}

} // namespace ibn::ad
