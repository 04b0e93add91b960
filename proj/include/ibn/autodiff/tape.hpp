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

#ifndef IBN_AUTODIFF_TAPE_HPP_
#define IBN_AUTODIFF_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <deque>
#include <vector>

#include "ibn/tensor.hpp"

namespace ibn::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var
{
public:
  Var() = default;

  Tape& tape() const { return *_tape; }
  std::size_t id() const { return _id; }
  bool valid() const { return _tape != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

  // Adjoint from the most recent backward pass; empty if no gradient reached
  // this node.
  const Tensor& grad() const;

private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : _tape(tape), _id(id) {}

  Tape* _tape = nullptr;
  std::size_t _id = 0;
};

// Called with the tape and the id of the node whose adjoint is being
// propagated. Implementations read the node's adjoint via Tape::grad and push
// contributions into their inputs via Tape::grad_sink.
using BackwardFn = std::function<void(Tape&, std::size_t)>;

using Gradients = std::unordered_map<std::size_t, Tensor>;

// Linear recording of operations for reverse-mode differentiation.
//
// Nodes are appended in evaluation order, so inputs always precede their
// consumers. Each backward() call resets every adjoint before replaying the
// tape in reverse; the tape can be differentiated repeatedly until clear().
class Tape
{
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Tensor value);
  // Non-differentiable input; no adjoint is ever allocated for it.
  Var constant(Tensor value);

  // Appends an operation result. The backward rule is dropped when no input
  // requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return _nodes[id].value; }
  const Tensor& grad(std::size_t id) const { return _nodes[id].grad; }
  bool requires_grad(std::size_t id) const { return _nodes[id].requires_grad; }

  // Adjoint buffer to accumulate into, zero-initialized on first use;
  // nullptr when the node does not need a gradient.
  Tensor* grad_sink(std::size_t id);

  // Reverse pass from a scalar root (shape [1]).
  void backward(Var root);

  // backward(root), then returns each leaf's adjoint keyed by id. Leaves the
  // root cannot reach get a zero gradient.
  Gradients gradients(Var root, std::span<const Var> leaves);

  std::size_t size() const { return _nodes.size(); }
  void clear() { _nodes.clear(); }

private:
  struct Node
  {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owned(const Var& v) const;

  // deque keeps value references stable while new nodes are appended.
  std::deque<Node> _nodes;
};

} // namespace ibn::ad

#endif
